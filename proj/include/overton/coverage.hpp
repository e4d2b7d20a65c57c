#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overton/cluster.hpp"
#include "overton/dataset.hpp"
#include "overton/error.hpp"
#include "overton/format.hpp"
#include "overton/stats/correlation.hpp"
#include "overton/stats/ols.hpp"

namespace overton::coverage {

/// Coverage threshold held in thousandths so the covered test on a
/// (sum, count) mean is exact integer arithmetic.
class CoverageThreshold {
public:
    CoverageThreshold() = default;

    static CoverageThreshold from(double tau) {
        if (!(tau >= 1.0 && tau <= 5.0))
            throw Error("coverage threshold must lie in [1, 5], got " + std::to_string(tau));
        CoverageThreshold t;
        t.milli_ = static_cast<long>(std::llround(tau * 1000));
        return t;
    }

    long milli() const { return milli_; }
    double value() const { return static_cast<double>(milli_) / 1000; }
    /// mean = sum / count is at least tau.
    bool covers(long sum, long count) const { return count > 0 && sum * 1000 >= milli_ * count; }

    auto operator<=>(const CoverageThreshold&) const = default;

private:
    long milli_ = 4000;
};

/// question -> participant -> model -> rating.
class RatingTable {
public:
    using ByModel = std::map<std::string, int>;
    using ByParticipant = std::map<std::string, ByModel>;

    static RatingTable from_dataset(const Dataset& ds) {
        RatingTable t;
        for (const auto& r : ds.ratings()) t.set(r.question_id, r.participant_id, r.model_id, r.rating);
        return t;
    }

    void set(const std::string& q, const std::string& p, const std::string& m, int rating) {
        data_[q][p][m] = rating;
    }

    std::optional<int> get(const std::string& q, const std::string& p, const std::string& m) const {
        auto qi = data_.find(q);
        if (qi == data_.end()) return std::nullopt;
        auto pi = qi->second.find(p);
        if (pi == qi->second.end()) return std::nullopt;
        auto mi = pi->second.find(m);
        if (mi == pi->second.end()) return std::nullopt;
        return mi->second;
    }

    const ByParticipant& question(const std::string& q) const {
        static const ByParticipant empty;
        auto it = data_.find(q);
        return it == data_.end() ? empty : it->second;
    }

    std::vector<std::string> models() const {
        std::set<std::string> s;
        for (const auto& [q, ps] : data_)
            for (const auto& [p, ms] : ps)
                for (const auto& [m, r] : ms) s.insert(m);
        return {s.begin(), s.end()};
    }

    const std::map<std::string, ByParticipant>& data() const { return data_; }

private:
    std::map<std::string, ByParticipant> data_;
};

/// Exact mean rating of one cluster for one model.
struct MeanRating {
    long sum = 0;
    long count = 0;
    bool partial = false;  // some member has no rating for this model
    bool ratable() const { return count > 0; }
    std::optional<double> mean() const {
        if (!ratable()) return std::nullopt;
        return static_cast<double>(sum) / static_cast<double>(count);
    }
};

struct ClusterRatings {
    std::string question_id;
    std::vector<std::string> models;
    std::vector<std::size_t> sizes;             // per cluster
    std::vector<std::vector<MeanRating>> means;  // [cluster][model]
    std::size_t unrated_members = 0;            // members with no rating for any model

    std::size_t k() const { return sizes.size(); }
};

inline ClusterRatings cluster_mean_ratings(const cluster::ClusterSolution& solution,
                                           const RatingTable& ratings,
                                           const std::vector<std::string>& models) {
    ClusterRatings out;
    out.question_id = solution.question_id;
    out.models = models;
    const auto& table = ratings.question(solution.question_id);
    for (const auto& members : solution.members()) {
        out.sizes.push_back(members.size());
        std::vector<MeanRating> row(models.size());
        for (const auto& pid : members) {
            auto it = table.find(pid);
            if (it == table.end() || it->second.empty()) {
                ++out.unrated_members;
                for (auto& mr : row) mr.partial = true;
                continue;
            }
            for (std::size_t m = 0; m < models.size(); ++m) {
                auto r = it->second.find(models[m]);
                if (r == it->second.end()) {
                    row[m].partial = true;
                } else {
                    row[m].sum += r->second;
                    ++row[m].count;
                }
            }
        }
        out.means.push_back(std::move(row));
    }
    return out;
}

inline ClusterRatings cluster_mean_ratings(const cluster::ClusterSolution& solution,
                                           const RatingTable& ratings) {
    return cluster_mean_ratings(solution, ratings, ratings.models());
}

struct ModelCoverage {
    std::vector<int> covered;  // cluster indices with mean >= tau
    std::size_t covered_size = 0;
    double oc = 0;
    double weighted_oc = 0;
};

struct QuestionCoverage {
    std::string question_id;
    CoverageThreshold tau;
    ClusterRatings clusters;
    std::map<std::string, ModelCoverage> models;

    std::size_t k() const { return clusters.k(); }
    std::size_t participants() const {
        std::size_t n = 0;
        for (auto s : clusters.sizes) n += s;
        return n;
    }
};

inline QuestionCoverage question_coverage(const ClusterRatings& clusters, CoverageThreshold tau) {
    if (clusters.k() == 0) throw Error("coverage: question " + clusters.question_id + " has no clusters");
    QuestionCoverage q;
    q.question_id = clusters.question_id;
    q.tau = tau;
    q.clusters = clusters;
    const std::size_t total = q.participants();
    for (std::size_t m = 0; m < clusters.models.size(); ++m) {
        ModelCoverage mc;
        for (std::size_t c = 0; c < clusters.k(); ++c) {
            const auto& mr = clusters.means[c][m];
            if (tau.covers(mr.sum, mr.count)) {
                mc.covered.push_back(static_cast<int>(c));
                mc.covered_size += clusters.sizes[c];
            }
        }
        mc.oc = static_cast<double>(mc.covered.size()) / static_cast<double>(clusters.k());
        mc.weighted_oc = total ? static_cast<double>(mc.covered_size) / static_cast<double>(total) : 0.0;
        q.models.emplace(clusters.models[m], std::move(mc));
    }
    return q;
}

struct ModelScore {
    double os = 0;
    double weighted_os = 0;
};

struct BenchmarkScores {
    std::vector<std::string> questions;  // the question set X, sorted
    std::map<std::string, ModelScore> models;

    std::map<std::string, double> os() const {
        std::map<std::string, double> out;
        for (const auto& [m, s] : models) out[m] = s.os;
        return out;
    }
    std::map<std::string, double> weighted_os() const {
        std::map<std::string, double> out;
        for (const auto& [m, s] : models) out[m] = s.weighted_os;
        return out;
    }
};

namespace detail {

inline std::vector<const QuestionCoverage*> select(std::span<const QuestionCoverage> all,
                                                   const std::optional<std::set<std::string>>& subset) {
    std::map<std::string, const QuestionCoverage*> by_id;
    for (const auto& q : all) by_id.emplace(q.question_id, &q);
    std::vector<const QuestionCoverage*> out;
    if (!subset) {
        for (const auto& [id, q] : by_id) out.push_back(q);
    } else {
        for (const auto& id : *subset) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw Error("coverage: no coverage computed for question " + id);
            out.push_back(it->second);
        }
    }
    if (out.empty()) throw Error("coverage: empty question set");
    return out;
}

}  // namespace detail

/// Mean OC and weighted OC per model over the question set (all questions
/// when no subset is given). Questions are summed in id order.
inline BenchmarkScores overton_scores(std::span<const QuestionCoverage> all,
                                      const std::optional<std::set<std::string>>& subset = std::nullopt) {
    const auto qs = detail::select(all, subset);
    BenchmarkScores out;
    std::set<std::string> models;
    for (const auto* q : qs) {
        out.questions.push_back(q->question_id);
        for (const auto& [m, c] : q->models) models.insert(m);
    }
    const double n = static_cast<double>(qs.size());
    for (const auto& m : models) {
        double oc = 0, woc = 0;
        for (const auto* q : qs) {
            auto it = q->models.find(m);
            if (it == q->models.end())
                throw Error("coverage: model " + m + " missing on question " + q->question_id);
            oc += it->second.oc;
            woc += it->second.weighted_oc;
        }
        out.models[m] = {oc / n, woc / n};
    }
    return out;
}

struct ReferenceScores {
    double oc = 0;
    double weighted = 0;
    std::map<std::string, ModelCoverage> per_question;
};

/// Best-across-models reference: a cluster counts as covered when any model covers it.
inline ReferenceScores best_across_models(std::span<const QuestionCoverage> all,
                                          const std::optional<std::set<std::string>>& subset = std::nullopt) {
    const auto qs = detail::select(all, subset);
    ReferenceScores out;
    for (const auto* q : qs) {
        if (q->models.empty()) throw Error("coverage: no models on question " + q->question_id);
        std::set<int> any;
        for (const auto& [m, c] : q->models) any.insert(c.covered.begin(), c.covered.end());
        ModelCoverage mc;
        mc.covered.assign(any.begin(), any.end());
        for (int c : mc.covered) mc.covered_size += q->clusters.sizes[static_cast<std::size_t>(c)];
        mc.oc = static_cast<double>(mc.covered.size()) / static_cast<double>(q->k());
        const auto total = q->participants();
        mc.weighted_oc = total ? static_cast<double>(mc.covered_size) / static_cast<double>(total) : 0.0;
        out.oc += mc.oc;
        out.weighted += mc.weighted_oc;
        out.per_question.emplace(q->question_id, std::move(mc));
    }
    out.oc /= static_cast<double>(qs.size());
    out.weighted /= static_cast<double>(qs.size());
    return out;
}

inline std::vector<QuestionCoverage> coverage_at(std::span<const ClusterRatings> clusters, CoverageThreshold tau) {
    std::vector<QuestionCoverage> out;
    for (const auto& c : clusters) out.push_back(question_coverage(c, tau));
    return out;
}

// ---------------------------------------------------------------------------
// Threshold sensitivity

struct PairwiseRates {
    std::vector<std::string> models;
    std::vector<std::vector<double>> win;  // [row][col]: fraction of taus with row > col
    std::vector<std::vector<double>> tie;
    double loss(std::size_t a, std::size_t b) const { return win[b][a]; }
};

struct TauRow {
    CoverageThreshold tau;
    BenchmarkScores scores;
    std::optional<double> kendall_os;  // vs the reference ranking; empty when undefined
    std::optional<double> kendall_weighted;
};

struct SensitivityReport {
    CoverageThreshold reference;
    std::vector<TauRow> rows;  // ascending tau
    std::optional<double> median_kendall_os;  // over the non-reference taus
    std::optional<double> median_kendall_weighted;
    PairwiseRates win_os;
    PairwiseRates win_weighted;
};

inline std::vector<double> default_tau_grid() { return {3.6, 3.7, 3.8, 3.9, 4.0}; }

namespace detail {

inline std::optional<double> median(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

inline PairwiseRates pairwise(const std::vector<std::string>& models,
                              const std::vector<std::map<std::string, double>>& per_tau) {
    PairwiseRates r;
    r.models = models;
    const auto M = models.size();
    r.win.assign(M, std::vector<double>(M, 0.0));
    r.tie.assign(M, std::vector<double>(M, 0.0));
    const double T = static_cast<double>(per_tau.size());
    for (std::size_t a = 0; a < M; ++a)
        for (std::size_t b = 0; b < M; ++b) {
            double w = 0, t = 0;
            for (const auto& s : per_tau) {
                const double x = s.at(models[a]), y = s.at(models[b]);
                if (x > y) w += 1;
                else if (x == y) t += 1;
            }
            r.win[a][b] = w / T;
            r.tie[a][b] = t / T;
        }
    return r;
}

inline std::optional<double> rank_agreement(const std::map<std::string, double>& a,
                                             const std::map<std::string, double>& b) {
    std::vector<double> x, y;
    for (const auto& [m, v] : a) {
        x.push_back(v);
        y.push_back(b.at(m));
    }
    if (x.size() < 2) return std::nullopt;
    return stats::kendall_tau_b(x, y);
}

}  // namespace detail

inline SensitivityReport threshold_sensitivity(std::span<const ClusterRatings> clusters,
                                               std::vector<double> tau_grid,
                                               const std::optional<std::set<std::string>>& subset = std::nullopt,
                                               double reference_tau = 4.0) {
    if (tau_grid.empty()) throw Error("threshold sensitivity: empty tau grid");
    std::set<CoverageThreshold> taus;
    for (double t : tau_grid) taus.insert(CoverageThreshold::from(t));
    SensitivityReport out;
    out.reference = CoverageThreshold::from(reference_tau);
    if (!taus.count(out.reference))
        throw Error("threshold sensitivity: tau grid must contain the reference " + fmt::fixed(reference_tau, 1));

    for (const auto& tau : taus) {
        const auto cov = coverage_at(clusters, tau);
        out.rows.push_back({tau, overton_scores(cov, subset), std::nullopt, std::nullopt});
    }
    const auto& ref = *std::find_if(out.rows.begin(), out.rows.end(),
                                    [&](const TauRow& r) { return r.tau == out.reference; });
    const auto ref_os = ref.scores.os();
    const auto ref_w = ref.scores.weighted_os();
    std::vector<double> k_os, k_w;
    std::vector<std::map<std::string, double>> all_os, all_w;
    for (auto& row : out.rows) {
        row.kendall_os = detail::rank_agreement(row.scores.os(), ref_os);
        row.kendall_weighted = detail::rank_agreement(row.scores.weighted_os(), ref_w);
        if (row.tau != out.reference) {
            if (row.kendall_os) k_os.push_back(*row.kendall_os);
            if (row.kendall_weighted) k_w.push_back(*row.kendall_weighted);
        }
        all_os.push_back(row.scores.os());
        all_w.push_back(row.scores.weighted_os());
    }
    out.median_kendall_os = detail::median(k_os);
    out.median_kendall_weighted = detail::median(k_w);
    std::vector<std::string> models;
    for (const auto& [m, s] : ref_os) models.push_back(m);
    out.win_os = detail::pairwise(models, all_os);
    out.win_weighted = detail::pairwise(models, all_w);
    return out;
}

// ---------------------------------------------------------------------------
// Correlation analyses

struct CorrelationSummary {
    std::map<std::string, stats::CorrelationResult> per_model;
    std::optional<stats::CorrelationResult> pooled;  // all pairs concatenated
    std::optional<double> mean_across_models;        // mean of defined per-model r
    std::size_t undefined_models = 0;
};

namespace detail {

inline std::optional<stats::CorrelationResult> pearson_or_empty(const std::vector<double>& x,
                                                                const std::vector<double>& y) {
    if (x.size() < 3) return std::nullopt;
    return stats::correlation(x, y, stats::CorrelationKind::pearson);
}

inline CorrelationSummary summarize(const std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>& pairs) {
    CorrelationSummary out;
    std::vector<double> px, py;
    double sum = 0;
    std::size_t defined = 0;
    for (const auto& [m, xy] : pairs) {
        px.insert(px.end(), xy.first.begin(), xy.first.end());
        py.insert(py.end(), xy.second.begin(), xy.second.end());
        auto r = pearson_or_empty(xy.first, xy.second);
        if (!r || !r->defined()) {
            ++out.undefined_models;
            if (r) out.per_model.emplace(m, *r);
            continue;
        }
        sum += *r->r;
        ++defined;
        out.per_model.emplace(m, *r);
    }
    out.pooled = pearson_or_empty(px, py);
    if (defined) out.mean_across_models = sum / static_cast<double>(defined);
    return out;
}

}  // namespace detail

/// Pearson r between the number of clusters per question and per-question OC.
inline CorrelationSummary difficulty_correlation(std::span<const QuestionCoverage> coverages) {
    if (coverages.size() < 3) throw Error("difficulty correlation needs at least 3 questions");
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> pairs;
    for (const auto& q : coverages)
        for (const auto& [m, c] : q.models) {
            pairs[m].first.push_back(static_cast<double>(q.k()));
            pairs[m].second.push_back(c.oc);
        }
    return detail::summarize(pairs);
}

/// Pearson r between cluster size and the cluster's mean rating, over all
/// ratable (cluster, model) pairs.
inline CorrelationSummary cluster_size_correlation(std::span<const ClusterRatings> clusters) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> pairs;
    for (const auto& q : clusters)
        for (std::size_t c = 0; c < q.k(); ++c)
            for (std::size_t m = 0; m < q.models.size(); ++m) {
                const auto mean = q.means[c][m].mean();
                if (!mean) continue;
                pairs[q.models[m]].first.push_back(static_cast<double>(q.sizes[c]));
                pairs[q.models[m]].second.push_back(*mean);
            }
    return detail::summarize(pairs);
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::json to_json(const stats::CorrelationResult& r) {
    nlohmann::json j;
    j["n"] = r.n;
    j["r"] = r.r ? nlohmann::json(*r.r) : nlohmann::json(nullptr);
    j["p"] = r.p ? nlohmann::json(*r.p) : nlohmann::json(nullptr);
    j["approximate"] = r.approximate;
    j["defined"] = r.defined();
    return j;
}

inline nlohmann::json to_json(const CorrelationSummary& s) {
    nlohmann::json j;
    j["per_model"] = nlohmann::json::object();
    for (const auto& [m, r] : s.per_model) j["per_model"][m] = to_json(r);
    j["pooled"] = s.pooled ? to_json(*s.pooled) : nlohmann::json(nullptr);
    j["mean_across_models"] = s.mean_across_models ? nlohmann::json(*s.mean_across_models) : nlohmann::json(nullptr);
    j["undefined_models"] = s.undefined_models;
    return j;
}

inline nlohmann::json to_json(const QuestionCoverage& q) {
    nlohmann::json j;
    j["question_id"] = q.question_id;
    j["tau"] = q.tau.value();
    j["k"] = q.k();
    j["cluster_sizes"] = q.clusters.sizes;
    j["unrated_members"] = q.clusters.unrated_members;
    nlohmann::json models = nlohmann::json::object();
    for (std::size_t mi = 0; mi < q.clusters.models.size(); ++mi) {
        const auto& m = q.clusters.models[mi];
        const auto& c = q.models.at(m);
        nlohmann::json means = nlohmann::json::array();
        for (std::size_t k = 0; k < q.k(); ++k) {
            const auto& mr = q.clusters.means[k][mi];
            means.push_back({{"sum", mr.sum},
                             {"count", mr.count},
                             {"mean", mr.mean() ? nlohmann::json(*mr.mean()) : nlohmann::json(nullptr)},
                             {"partial", mr.partial}});
        }
        models[m] = {{"covered", c.covered}, {"oc", c.oc}, {"weighted_oc", c.weighted_oc}, {"cluster_means", means}};
    }
    j["models"] = models;
    return j;
}

inline nlohmann::json to_json(const BenchmarkScores& s) {
    nlohmann::json j;
    j["questions"] = s.questions;
    j["models"] = nlohmann::json::object();
    for (const auto& [m, v] : s.models) j["models"][m] = {{"os", v.os}, {"weighted_os", v.weighted_os}};
    return j;
}

inline nlohmann::json to_json(const ReferenceScores& r) {
    return {{"oc", r.oc}, {"weighted", r.weighted}};
}

inline nlohmann::json to_json(const PairwiseRates& p) {
    return {{"models", p.models}, {"win", p.win}, {"tie", p.tie}};
}

inline nlohmann::json to_json(const SensitivityReport& s) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"tau", r.tau.value()},
                        {"scores", to_json(r.scores)},
                        {"kendall_os", r.kendall_os ? nlohmann::json(*r.kendall_os) : nlohmann::json(nullptr)},
                        {"kendall_weighted", r.kendall_weighted ? nlohmann::json(*r.kendall_weighted) : nlohmann::json(nullptr)}});
    return {{"reference_tau", s.reference.value()},
            {"rows", rows},
            {"median_kendall_os", s.median_kendall_os ? nlohmann::json(*s.median_kendall_os) : nlohmann::json(nullptr)},
            {"median_kendall_weighted",
             s.median_kendall_weighted ? nlohmann::json(*s.median_kendall_weighted) : nlohmann::json(nullptr)},
            {"win_os", to_json(s.win_os)},
            {"win_weighted", to_json(s.win_weighted)}};
}

/// Per-question table: topic, qid, #clusters, model, OC, weighted OC.
inline std::string question_table_markdown(std::span<const QuestionCoverage> coverages,
                                           const std::map<std::string, std::string>& topics) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& q : coverages) {
        auto t = topics.find(q.question_id);
        const std::string topic = t == topics.end() ? "" : t->second;
        for (const auto& [m, c] : q.models)
            rows.push_back({topic, q.question_id, std::to_string(q.k()), m, fmt::fixed(c.oc), fmt::fixed(c.weighted_oc)});
    }
    return fmt::table({"Topic", "QID", "#Clusters", "Model", "OC", "Weighted OC"}, rows);
}

inline std::string sensitivity_markdown(const SensitivityReport& s) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : s.rows)
        rows.push_back({fmt::fixed(r.tau.value(), 1), fmt::fixed(r.kendall_os), fmt::fixed(r.kendall_weighted)});
    rows.push_back({"median (alternatives)", fmt::fixed(s.median_kendall_os), fmt::fixed(s.median_kendall_weighted)});
    return fmt::table({"tau", "Kendall tau (OS)", "Kendall tau (weighted OS)"}, rows);
}

inline std::string pairwise_markdown(const PairwiseRates& p) {
    std::vector<std::string> header{"win rate"};
    header.insert(header.end(), p.models.begin(), p.models.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t a = 0; a < p.models.size(); ++a) {
        std::vector<std::string> row{p.models[a]};
        for (std::size_t b = 0; b < p.models.size(); ++b) row.push_back(a == b ? "-" : fmt::fixed(p.win[a][b], 2));
        rows.push_back(std::move(row));
    }
    return fmt::table(header, rows);
}

enum class Metric { oc, weighted };

inline std::string to_string(Metric m) { return m == Metric::oc ? "oc" : "weighted_oc"; }

/// One regression observation per (model, question) in the selected set.
inline std::vector<stats::CoverageObservation> observations(
    std::span<const QuestionCoverage> all, Metric metric,
    const std::optional<std::set<std::string>>& subset = std::nullopt) {
    std::vector<stats::CoverageObservation> out;
    for (const auto* q : detail::select(all, subset))
        for (const auto& [m, c] : q->models)
            out.push_back({m, q->question_id, metric == Metric::oc ? c.oc : c.weighted_oc});
    return out;
}

}  // namespace overton::coverage
