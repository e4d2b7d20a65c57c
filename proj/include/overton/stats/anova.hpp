#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "overton/error.hpp"
#include "overton/parallel.hpp"
#include "overton/rng.hpp"

namespace overton::stats {

struct AnovaTable {
    double f = 0;
    double ss_between = 0;
    double ss_total = 0;
    std::size_t groups = 0;
};

/// One-way ANOVA on integer group codes in [0, groups).
inline AnovaTable one_way_anova(std::span<const double> values, std::span<const int> codes,
                                std::size_t groups) {
    std::vector<double> sum(groups, 0.0);
    std::vector<std::size_t> count(groups, 0);
    double total = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum[static_cast<std::size_t>(codes[i])] += values[i];
        ++count[static_cast<std::size_t>(codes[i])];
        total += values[i];
    }
    const double n = static_cast<double>(values.size());
    const double mean = total / n;
    AnovaTable t;
    t.groups = groups;
    for (double v : values) t.ss_total += (v - mean) * (v - mean);
    for (std::size_t g = 0; g < groups; ++g) {
        if (count[g] == 0) continue;
        const double mg = sum[g] / static_cast<double>(count[g]);
        t.ss_between += static_cast<double>(count[g]) * (mg - mean) * (mg - mean);
    }
    const double ss_within = std::max(0.0, t.ss_total - t.ss_between);
    const double df_b = static_cast<double>(groups) - 1;
    const double df_w = n - static_cast<double>(groups);
    const double tiny = 1e-12 * std::max(1.0, t.ss_total);
    if (ss_within <= tiny || df_w <= 0)
        t.f = t.ss_between > tiny ? std::numeric_limits<double>::infinity() : 0.0;
    else
        t.f = (t.ss_between / df_b) / (ss_within / df_w);
    return t;
}

enum class PermutationMode { random, exhaustive };

struct PermutationAnovaResult {
    std::string category;
    std::string metric;
    double f = 0;
    double p_perm = 1;
    double eta_squared = 0;
    std::size_t groups = 0;
    std::size_t permutations = 0;
    std::uint64_t seed = 0;
    bool exact = false;
};

namespace detail {

// F ties are decided with a relative tolerance so float noise in the
// permuted sums cannot flip an exact tie.
inline bool at_least(double f, double observed) {
    if (std::isinf(observed)) return std::isinf(f);
    return f >= observed - 1e-9 * std::max(1.0, std::abs(observed));
}

inline std::uint64_t factorial(std::size_t n) {
    std::uint64_t f = 1;
    for (std::size_t i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace detail

inline constexpr std::size_t kMaxExhaustive = 10;

/// Permutation one-way ANOVA. Random mode draws B label permutations and
/// reports (1 + hits) / (1 + B); exhaustive mode enumerates all N! label
/// orderings (identity included) and reports hits / N!.
inline PermutationAnovaResult permutation_anova(std::span<const double> values,
                                                std::span<const std::string> labels,
                                                std::size_t permutations, std::uint64_t seed,
                                                PermutationMode mode = PermutationMode::random,
                                                unsigned workers = 1) {
    if (values.size() != labels.size()) throw NumericError("anova: values and labels differ in length");
    std::map<std::string, int> code_of;
    for (const auto& l : labels) code_of.emplace(l, 0);
    if (code_of.size() < 2) throw NumericError("anova: need at least 2 groups");
    int next = 0;
    for (auto& [l, c] : code_of) c = next++;
    std::vector<int> codes;
    for (const auto& l : labels) codes.push_back(code_of.at(l));
    const std::size_t G = code_of.size();

    const auto observed = one_way_anova(values, codes, G);
    if (observed.ss_total <= 0) throw NumericError("anova: F undefined, all values identical");

    PermutationAnovaResult out;
    out.f = observed.f;
    out.eta_squared = std::clamp(observed.ss_between / observed.ss_total, 0.0, 1.0);
    out.groups = G;
    out.seed = seed;

    if (mode == PermutationMode::exhaustive) {
        if (values.size() > kMaxExhaustive)
            throw NumericError("anova: exhaustive enumeration limited to " +
                               std::to_string(kMaxExhaustive) + " datapoints");
        std::vector<std::size_t> perm(values.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::vector<int> shuffled(codes.size());
        std::uint64_t hits = 0;
        do {
            for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = codes[perm[i]];
            if (detail::at_least(one_way_anova(values, shuffled, G).f, observed.f)) ++hits;
        } while (std::next_permutation(perm.begin(), perm.end()));
        const auto total = detail::factorial(values.size());
        out.permutations = total;
        out.exact = true;
        out.p_perm = static_cast<double>(hits) / static_cast<double>(total);
        return out;
    }

    std::vector<char> hit(permutations, 0);
    parallel_for(permutations, workers, [&](std::size_t b) {
        auto eng = rng::substream(seed, b);
        std::vector<int> shuffled = codes;
        rng::shuffle(eng, std::span<int>(shuffled));
        hit[b] = detail::at_least(one_way_anova(values, shuffled, G).f, observed.f);
    });
    const auto hits = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
    out.permutations = permutations;
    out.p_perm = (1 + hits) / (1 + static_cast<double>(permutations));
    return out;
}

}  // namespace overton::stats
