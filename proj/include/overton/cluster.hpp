#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "overton/error.hpp"
#include "overton/hash.hpp"
#include "overton/parallel.hpp"
#include "overton/rng.hpp"
#include "overton/vote_matrix.hpp"

// Viewpoint clustering on sparse ternary vote matrices: a dynamic-k k-means
// that starts from k_max farthest-point seeds, splits off distal points,
// merges near-duplicate centroids and finally dissolves undersized clusters.
// Distances are pairwise-complete and rescaled for participation rate.

namespace overton::cluster {

inline constexpr std::size_t kMaxIterations = 100;

struct ClusterConfig {
    int k_max = 10;
    /// A split fires when the most distal point lies farther than this from
    /// its centroid.
    double distance_threshold = 0.7;
    /// Centroid pairs closer than this are merged.
    double outlier_threshold = 0.2;
    int min_cluster_size = 1;
    std::uint64_t seed = 0;

    auto key() const {
        return std::tuple(k_max, distance_threshold, outlier_threshold, min_cluster_size);
    }

    void validate() const {
        if (k_max < 2) throw Error("cluster config: k_max must be >= 2");
        if (!(distance_threshold > 0.0 && distance_threshold <= 1.0))
            throw Error("cluster config: distance_threshold must lie in (0, 1]");
        if (!(outlier_threshold > 0.0 && outlier_threshold <= 1.0))
            throw Error("cluster config: outlier_threshold must lie in (0, 1]");
        if (min_cluster_size < 1) throw Error("cluster config: min_cluster_size must be >= 1");
    }

    bool operator==(const ClusterConfig&) const = default;
};

/// The four-parameter search grid, each configuration repeated per seed:
/// 2 x 3 x 3 x 3 x seeds runs.
inline std::vector<ClusterConfig> default_grid(int seeds = 5, std::uint64_t base_seed = 0) {
    std::vector<ClusterConfig> grid;
    for (int k_max : {10, 20})
        for (double dist : {0.5, 0.7, 0.9})
            for (double outlier : {0.2, 0.6, 1.0})
                for (int min_size : {1, 3, 5})
                    for (int s = 0; s < seeds; ++s)
                        grid.push_back({k_max, dist, outlier, min_size,
                                        base_seed + static_cast<std::uint64_t>(s)});
    return grid;
}

struct SolutionFlags {
    bool capped = false;        // iteration cap reached before a fixpoint
    bool no_structure = false;  // every grid run ended with k = 1
    bool residual = false;      // a cluster remains below min_cluster_size
    std::size_t incomparable_pairs = 0;  // row pairs with no shared statement
    bool operator==(const SolutionFlags&) const = default;
};

struct ClusterSolution {
    std::string question_id;
    std::vector<std::string> row_ids;
    std::vector<int> assignments;                 // per row, cluster index in [0, k)
    std::vector<std::vector<double>> centroids;   // NaN where no member voted
    int k = 0;
    std::optional<double> silhouette;             // undefined when k = 1
    ClusterConfig config;
    std::vector<std::size_t> cluster_sizes;
    SolutionFlags flags;
    std::size_t iterations = 0;

    std::map<std::string, int> assignment_map() const {
        std::map<std::string, int> out;
        for (std::size_t i = 0; i < row_ids.size(); ++i) out.emplace(row_ids[i], assignments[i]);
        return out;
    }

    /// Member ids per cluster.
    std::vector<std::vector<std::string>> members() const {
        std::vector<std::vector<std::string>> out(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < row_ids.size(); ++i)
            out[static_cast<std::size_t>(assignments[i])].push_back(row_ids[i]);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Distances

/// sqrt(d / d_i): compensates sparse participation.
inline double scaling_factor(const VoteMatrix& m, std::size_t row) {
    const std::size_t answered = m.answered(row);
    if (answered == 0)
        throw DataError(DataError::Kind::empty_matrix,
                        "row " + m.row_ids().at(row) + " has no votes and must be excluded");
    return std::sqrt(static_cast<double>(m.cols()) / static_cast<double>(answered));
}

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Euclidean distance over dimensions defined in both vectors, divided by
/// sqrt(shared) and by 2 so it lies in [0, 1]. nullopt when nothing is shared.
inline std::optional<double> normalized_distance(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    std::size_t shared = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        if (std::isnan(a[c]) || std::isnan(b[c])) continue;
        const double diff = a[c] - b[c];
        sum += diff * diff;
        ++shared;
    }
    if (shared == 0) return std::nullopt;
    return std::sqrt(sum / static_cast<double>(shared)) / 2.0;
}

inline std::vector<double> row_vector(const VoteMatrix& m, std::size_t r) {
    std::vector<double> v(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) v[c] = m.voted(r, c) ? m.at(r, c) : kNaN;
    return v;
}

}  // namespace detail

/// Distance from a row to a point (typically a centroid; NaN entries are
/// undefined), scaled by the row's participation factor. Throws when the two
/// share no defined dimension.
inline double scaled_distance(const VoteMatrix& m, std::size_t row, std::span<const double> point) {
    const auto v = detail::row_vector(m, row);
    const auto d = detail::normalized_distance(v, point);
    if (!d)
        throw NumericError("rows share no voted statement: " + m.row_ids().at(row) + " vs point");
    return *d * scaling_factor(m, row);
}

/// Row-to-row distance, scaled by the product of both participation
/// factors. Symmetric.
inline double scaled_distance(const VoteMatrix& m, std::size_t a, std::size_t b) {
    const auto va = detail::row_vector(m, a);
    const auto vb = detail::row_vector(m, b);
    const auto d = detail::normalized_distance(va, vb);
    if (!d)
        throw NumericError("rows share no voted statement: " + m.row_ids().at(a) + " vs " +
                           m.row_ids().at(b));
    return *d * scaling_factor(m, a) * scaling_factor(m, b);
}

/// All row-row distances, incomparable pairs counted at the maximal
/// normalized distance 1.0 (before scaling).
struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> values;
    std::size_t incomparable = 0;

    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }

    explicit DistanceMatrix(const VoteMatrix& m) : n(m.rows()), values(n * n, 0.0) {
        std::vector<std::vector<double>> rows;
        std::vector<double> scale;
        for (std::size_t r = 0; r < n; ++r) {
            rows.push_back(detail::row_vector(m, r));
            scale.push_back(scaling_factor(m, r));
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                auto d = detail::normalized_distance(rows[i], rows[j]);
                if (!d) ++incomparable;
                const double v = d.value_or(1.0) * scale[i] * scale[j];
                values[i * n + j] = values[j * n + i] = v;
            }
    }
};

// ---------------------------------------------------------------------------
// Silhouette

namespace detail {

inline double silhouette_from(const DistanceMatrix& dist, std::span<const int> labels, int k) {
    const std::size_t n = labels.size();
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(labels[i]);
        if (sizes[own] == 1) continue;  // singleton contributes 0
        std::ranges::fill(sums, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sums[static_cast<std::size_t>(labels[j])] += dist(i, j);
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sums.size(); ++c)
            if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

}  // namespace detail

/// Mean silhouette over rows using the row-row scaled distance. Requires
/// k >= 2 with every label in [0, k) used at least once.
inline double silhouette(const VoteMatrix& m, std::span<const int> assignments) {
    if (assignments.size() != m.rows()) throw Error("silhouette: one label per row required");
    const int k = assignments.empty() ? 0 : *std::ranges::max_element(assignments) + 1;
    if (k < 2) throw NumericError("silhouette is undefined for a single cluster");
    std::vector<bool> used(static_cast<std::size_t>(k), false);
    for (int l : assignments) {
        if (l < 0) throw Error("silhouette: negative label");
        used[static_cast<std::size_t>(l)] = true;
    }
    if (std::ranges::find(used, false) != used.end())
        throw NumericError("silhouette: every cluster must be nonempty");
    return detail::silhouette_from(DistanceMatrix(m), assignments, k);
}

/// Adjusted Rand index between two labelings of the same rows.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error("adjusted_rand_index: length mismatch");
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ca, cb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        ca[a[i]] += 1;
        cb[b[i]] += 1;
    }
    auto pairs = [](double x) { return x * (x - 1) / 2; };
    double index = 0, sa = 0, sb = 0;
    for (const auto& [_, v] : joint) index += pairs(v);
    for (const auto& [_, v] : ca) sa += pairs(v);
    for (const auto& [_, v] : cb) sb += pairs(v);
    const double expected = sa * sb / pairs(static_cast<double>(a.size()));
    const double max_index = (sa + sb) / 2;
    if (max_index == expected) return index == expected ? 1.0 : 0.0;
    return (index - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Dynamic k-means

namespace detail {

class KMeans {
public:
    KMeans(const VoteMatrix& m, const ClusterConfig& cfg) : cfg_(cfg), n_(m.rows()), d_(m.cols()) {
        // Canonical row order (by vote pattern, then id) makes the result
        // independent of the input row order.
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::ranges::sort(order_, [&](std::size_t x, std::size_t y) {
            const int cmp = std::memcmp(m.row(x), m.row(y), d_);
            return cmp != 0 ? cmp < 0 : m.row_ids()[x] < m.row_ids()[y];
        });
        for (auto r : order_) {
            rows_.push_back(row_vector(m, r));
            scale_.push_back(scaling_factor(m, r));
        }
        pairwise_.assign(n_ * n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) {
                auto dist = normalized_distance(rows_[i], rows_[j]);
                if (!dist) ++incomparable_;
                pairwise_[i * n_ + j] = pairwise_[j * n_ + i] = dist.value_or(1.0) * scale_[i] * scale_[j];
            }
    }

    ClusterSolution run(const VoteMatrix& m) {
        initialize();
        assign();
        recenter();

        bool converged = false;
        std::size_t it = 0;
        for (; it < kMaxIterations; ++it) {
            const bool split = try_split();
            if (split) {
                assign();
                recenter();
            }
            const bool merged = merge_close();
            const auto before = labels_;
            assign();
            recenter();
            if (!split && !merged && before == labels_) {
                converged = true;
                break;
            }
        }
        const bool capped = !converged;
        enforce_min_size();

        ClusterSolution sol;
        sol.question_id = m.question_id();
        sol.row_ids = m.row_ids();
        sol.config = cfg_;
        sol.iterations = it;
        sol.flags.capped = capped;
        sol.flags.incomparable_pairs = incomparable_;
        relabel_into(sol, m);
        if (sol.k >= 2) {
            std::vector<int> canonical(n_);
            for (std::size_t i = 0; i < n_; ++i) canonical[i] = labels_[i];
            sol.silhouette = silhouette_canonical(canonical, sol.k);
        }
        for (auto size : sol.cluster_sizes)
            if (size < static_cast<std::size_t>(cfg_.min_cluster_size)) sol.flags.residual = true;
        return sol;
    }

private:
    double row_pair(std::size_t i, std::size_t j) const { return pairwise_[i * n_ + j]; }

    double to_centroid(std::size_t r, std::size_t c) const {
        return normalized_distance(rows_[r], centroids_[c]).value_or(1.0) * scale_[r];
    }

    static double centroid_gap(std::span<const double> a, std::span<const double> b) {
        return normalized_distance(a, b).value_or(1.0);
    }

    // Greedy farthest-point seeding from a seeded random start.
    void initialize() {
        auto eng = rng::substream(cfg_.seed, 0);
        std::vector<std::size_t> centers{static_cast<std::size_t>(rng::below(eng, n_))};
        std::vector<double> nearest(n_);
        for (std::size_t i = 0; i < n_; ++i) nearest[i] = row_pair(i, centers[0]);
        nearest[centers[0]] = 0.0;
        while (centers.size() < static_cast<std::size_t>(cfg_.k_max)) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < n_; ++i)
                if (nearest[i] > nearest[best]) best = i;
            if (nearest[best] <= 0.0) break;
            centers.push_back(best);
            for (std::size_t i = 0; i < n_; ++i) nearest[i] = std::min(nearest[i], row_pair(i, best));
            nearest[best] = 0.0;
        }
        centroids_.clear();
        for (auto c : centers) centroids_.push_back(rows_[c]);
        labels_.assign(n_, 0);
    }

    void assign() {
        for (std::size_t r = 0; r < n_; ++r) {
            int best = 0;
            double best_d = to_centroid(r, 0);
            for (std::size_t c = 1; c < centroids_.size(); ++c) {
                const double dist = to_centroid(r, c);
                if (dist < best_d) {
                    best_d = dist;
                    best = static_cast<int>(c);
                }
            }
            labels_[r] = best;
        }
    }

    // Recomputes centroids from members and drops empty clusters.
    void recenter() {
        const std::size_t k = centroids_.size();
        std::vector<std::vector<double>> sum(k, std::vector<double>(d_, 0.0));
        std::vector<std::vector<int>> count(k, std::vector<int>(d_, 0));
        std::vector<std::size_t> size(k, 0);
        for (std::size_t r = 0; r < n_; ++r) {
            const auto c = static_cast<std::size_t>(labels_[r]);
            ++size[c];
            for (std::size_t j = 0; j < d_; ++j)
                if (!std::isnan(rows_[r][j])) {
                    sum[c][j] += rows_[r][j];
                    ++count[c][j];
                }
        }
        std::vector<int> remap(k, -1);
        std::vector<std::vector<double>> next;
        for (std::size_t c = 0; c < k; ++c) {
            if (size[c] == 0) continue;
            remap[c] = static_cast<int>(next.size());
            std::vector<double> centroid(d_);
            for (std::size_t j = 0; j < d_; ++j)
                centroid[j] = count[c][j] ? sum[c][j] / count[c][j] : kNaN;
            next.push_back(std::move(centroid));
        }
        for (auto& l : labels_) l = remap[static_cast<std::size_t>(l)];
        centroids_ = std::move(next);
    }

    // Spawns a cluster at the most distal point unless the merge rule
    // would immediately fold it back into an existing centroid.
    bool try_split() {
        if (centroids_.size() >= static_cast<std::size_t>(cfg_.k_max)) return false;
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t r = 0; r < n_; ++r) {
            const double dist = to_centroid(r, static_cast<std::size_t>(labels_[r]));
            if (dist > far_d) {
                far_d = dist;
                far = r;
            }
        }
        if (far_d <= cfg_.distance_threshold) return false;
        for (const auto& c : centroids_)
            if (centroid_gap(rows_[far], c) < cfg_.outlier_threshold) return false;
        centroids_.push_back(rows_[far]);
        labels_[far] = static_cast<int>(centroids_.size() - 1);
        return true;
    }

    void merge_clusters(std::size_t keep, std::size_t drop) {
        for (auto& l : labels_)
            if (l == static_cast<int>(drop)) l = static_cast<int>(keep);
        recenter();
    }

    // Agglomerates centroid pairs below the merge threshold, closest first.
    bool merge_close() {
        bool any = false;
        for (;;) {
            const std::size_t k = centroids_.size();
            if (k < 2) return any;
            double best = std::numeric_limits<double>::infinity();
            std::size_t bi = 0, bj = 0;
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = i + 1; j < k; ++j) {
                    const double gap = centroid_gap(centroids_[i], centroids_[j]);
                    if (gap < best) {
                        best = gap;
                        bi = i;
                        bj = j;
                    }
                }
            if (!(best < cfg_.outlier_threshold)) return any;
            merge_clusters(bi, bj);
            any = true;
        }
    }

    void settle() {
        for (std::size_t i = 0; i < kMaxIterations; ++i) {
            const auto before = labels_;
            assign();
            recenter();
            if (before == labels_) return;
        }
    }

    // Dissolves the smallest undersized cluster into its nearest neighbour
    // and re-settles assignments until every cluster meets the minimum.
    void enforce_min_size() {
        const auto min_size = static_cast<std::size_t>(cfg_.min_cluster_size);
        if (min_size <= 1) return;
        while (centroids_.size() > 1) {
            std::vector<std::size_t> size(centroids_.size(), 0);
            for (int l : labels_) ++size[static_cast<std::size_t>(l)];
            std::size_t small = size.size();
            for (std::size_t c = 0; c < size.size(); ++c)
                if (size[c] < min_size && (small == size.size() || size[c] < size[small])) small = c;
            if (small == size.size()) return;
            std::size_t target = small == 0 ? 1 : 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < centroids_.size(); ++c) {
                if (c == small) continue;
                const double gap = centroid_gap(centroids_[small], centroids_[c]);
                if (gap < best) {
                    best = gap;
                    target = c;
                }
            }
            merge_clusters(target, small);
            settle();
        }
    }

    double silhouette_canonical(const std::vector<int>& labels, int k) const {
        std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
        for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
        double total = 0.0;
        std::vector<double> sums(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < n_; ++i) {
            const auto own = static_cast<std::size_t>(labels[i]);
            if (sizes[own] == 1) continue;
            std::ranges::fill(sums, 0.0);
            for (std::size_t j = 0; j < n_; ++j)
                if (j != i) sums[static_cast<std::size_t>(labels[j])] += row_pair(i, j);
            const double a = sums[own] / static_cast<double>(sizes[own] - 1);
            double b = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < sums.size(); ++c)
                if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
            const double denom = std::max(a, b);
            total += denom > 0.0 ? (b - a) / denom : 0.0;
        }
        return total / static_cast<double>(n_);
    }

    // Labels clusters by their lexicographically smallest member id and maps
    // canonical rows back to the matrix's row order.
    void relabel_into(ClusterSolution& sol, const VoteMatrix& m) {
        const std::size_t k = centroids_.size();
        std::vector<const std::string*> first(k, nullptr);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto c = static_cast<std::size_t>(labels_[i]);
            const std::string& id = m.row_ids()[order_[i]];
            if (!first[c] || id < *first[c]) first[c] = &id;
        }
        std::vector<std::size_t> by_first(k);
        std::iota(by_first.begin(), by_first.end(), std::size_t{0});
        std::ranges::sort(by_first, [&](std::size_t x, std::size_t y) { return *first[x] < *first[y]; });
        std::vector<int> relabel(k);
        for (std::size_t pos = 0; pos < k; ++pos) relabel[by_first[pos]] = static_cast<int>(pos);

        for (auto& l : labels_) l = relabel[static_cast<std::size_t>(l)];
        std::vector<std::vector<double>> centroids(k);
        for (std::size_t c = 0; c < k; ++c) centroids[static_cast<std::size_t>(relabel[c])] = centroids_[c];
        centroids_ = std::move(centroids);

        sol.k = static_cast<int>(k);
        sol.assignments.assign(n_, 0);
        sol.cluster_sizes.assign(k, 0);
        for (std::size_t i = 0; i < n_; ++i) {
            sol.assignments[order_[i]] = labels_[i];
            ++sol.cluster_sizes[static_cast<std::size_t>(labels_[i])];
        }
        sol.centroids = centroids_;
    }

    ClusterConfig cfg_;
    std::size_t n_;
    std::size_t d_;
    std::vector<std::size_t> order_;
    std::vector<std::vector<double>> rows_;
    std::vector<double> scale_;
    std::vector<double> pairwise_;
    std::size_t incomparable_ = 0;
    std::vector<std::vector<double>> centroids_;
    std::vector<int> labels_;
};

}  // namespace detail

/// One run of the dynamic k-means. Deterministic for fixed (matrix, config).
inline ClusterSolution run_dynamic_kmeans(const VoteMatrix& m, const ClusterConfig& cfg) {
    cfg.validate();
    if (m.rows() < 2)
        throw DataError(DataError::Kind::empty_matrix,
                        "clustering needs at least 2 voters, question " + m.question_id() + " has " +
                            std::to_string(m.rows()));
    return detail::KMeans(m, cfg).run(m);
}

/// True when `a` should be preferred over `b`: higher silhouette, then
/// smaller k, smaller config tuple, smaller seed. Undefined silhouettes
/// (k = 1) lose to any defined one.
inline bool better_solution(const ClusterSolution& a, const ClusterSolution& b) {
    if (a.silhouette.has_value() != b.silhouette.has_value()) return a.silhouette.has_value();
    if (a.silhouette && *a.silhouette != *b.silhouette) return *a.silhouette > *b.silhouette;
    if (a.k != b.k) return a.k < b.k;
    if (a.config.key() != b.config.key()) return a.config.key() < b.config.key();
    return a.config.seed < b.config.seed;
}

/// Runs every grid entry (each carries its own seed) and keeps the best.
inline ClusterSolution select_best_solution(const VoteMatrix& m, std::span<const ClusterConfig> grid,
                                            unsigned workers = 1) {
    if (grid.empty()) throw Error("select_best_solution: empty grid");
    for (const auto& cfg : grid) cfg.validate();
    std::vector<std::optional<ClusterSolution>> runs(grid.size());
    parallel_for(grid.size(), workers, [&](std::size_t i) { runs[i] = run_dynamic_kmeans(m, grid[i]); });

    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (better_solution(*runs[i], *runs[best])) best = i;
    ClusterSolution winner = std::move(*runs[best]);
    for (const auto& r : runs)
        if (r->silhouette && (!winner.silhouette || *r->silhouette > *winner.silhouette))
            throw Error("select_best_solution: selected silhouette is not maximal");
    if (winner.k == 1) winner.flags.no_structure = true;
    return winner;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json to_json(const ClusterConfig& c) {
    return {{"k_max", c.k_max},
            {"distance_threshold", c.distance_threshold},
            {"outlier_threshold", c.outlier_threshold},
            {"min_cluster_size", c.min_cluster_size},
            {"seed", c.seed}};
}

inline ClusterConfig config_from_json(const nlohmann::json& j) {
    ClusterConfig c;
    c.k_max = j.at("k_max").get<int>();
    c.distance_threshold = j.at("distance_threshold").get<double>();
    c.outlier_threshold = j.at("outlier_threshold").get<double>();
    c.min_cluster_size = j.at("min_cluster_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline nlohmann::json to_json(const ClusterSolution& s) {
    nlohmann::json assignments = nlohmann::json::object();
    for (std::size_t i = 0; i < s.row_ids.size(); ++i) assignments[s.row_ids[i]] = s.assignments[i];
    nlohmann::json centroids = nlohmann::json::array();
    for (const auto& c : s.centroids) {
        nlohmann::json row = nlohmann::json::array();
        for (double v : c) row.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
        centroids.push_back(std::move(row));
    }
    return {{"question_id", s.question_id},
            {"config", to_json(s.config)},
            {"k", s.k},
            {"silhouette", s.silhouette ? nlohmann::json(*s.silhouette) : nlohmann::json(nullptr)},
            {"assignments", assignments},
            {"cluster_sizes", s.cluster_sizes},
            {"centroids", centroids},
            {"iterations", s.iterations},
            {"flags",
             {{"capped", s.flags.capped},
              {"no_structure", s.flags.no_structure},
              {"residual", s.flags.residual},
              {"incomparable_pairs", s.flags.incomparable_pairs}}}};
}

inline ClusterSolution solution_from_json(const nlohmann::json& j) {
    ClusterSolution s;
    s.question_id = j.at("question_id").get<std::string>();
    s.config = config_from_json(j.at("config"));
    s.k = j.at("k").get<int>();
    if (!j.at("silhouette").is_null()) s.silhouette = j.at("silhouette").get<double>();
    for (const auto& [id, label] : j.at("assignments").items()) {
        s.row_ids.push_back(id);
        s.assignments.push_back(label.get<int>());
    }
    s.cluster_sizes = j.at("cluster_sizes").get<std::vector<std::size_t>>();
    for (const auto& row : j.at("centroids")) {
        std::vector<double> c;
        for (const auto& v : row) c.push_back(v.is_null() ? detail::kNaN : v.get<double>());
        s.centroids.push_back(std::move(c));
    }
    s.iterations = j.at("iterations").get<std::size_t>();
    const auto& f = j.at("flags");
    s.flags.capped = f.at("capped").get<bool>();
    s.flags.no_structure = f.at("no_structure").get<bool>();
    s.flags.residual = f.at("residual").get<bool>();
    s.flags.incomparable_pairs = f.at("incomparable_pairs").get<std::size_t>();
    return s;
}

/// Content hash of (matrix, grid); keys the on-disk solution cache.
inline std::string cache_key(const VoteMatrix& m, std::span<const ClusterConfig> grid) {
    Sha256 h;
    h.update("overton-cluster-v1\n").update(m.question_id()).update("\n");
    for (const auto& id : m.column_ids()) h.update(id).update(",");
    h.update("\n");
    for (std::size_t r = 0; r < m.rows(); ++r) {
        h.update(m.row_ids()[r]).update(":");
        h.update(std::string_view(reinterpret_cast<const char*>(m.row(r)), m.cols()));
        h.update("\n");
    }
    for (const auto& c : grid) h.update(to_json(c).dump()).update("\n");
    return h.hex();
}

}  // namespace overton::cluster
