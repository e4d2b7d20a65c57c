#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "overton/error.hpp"
#include "overton/stats/correlation.hpp"

namespace overton::stats {

struct WinTieRate {
    double win = 0;
    double tie = 0;
    double loss = 0;
    std::size_t n = 0;
};

/// Fractions of aligned datapoints where A's absolute error is strictly
/// lower, equal, or higher than B's.
inline WinTieRate win_tie_rates(std::span<const double> errors_a, std::span<const double> errors_b) {
    if (errors_a.size() != errors_b.size()) throw NumericError("win rate: unaligned error vectors");
    if (errors_a.empty()) throw NumericError("win rate: no shared datapoints");
    std::size_t win = 0, tie = 0;
    for (std::size_t i = 0; i < errors_a.size(); ++i) {
        const double a = std::abs(errors_a[i]), b = std::abs(errors_b[i]);
        if (a < b) ++win;
        else if (a == b) ++tie;
    }
    WinTieRate r;
    r.n = errors_a.size();
    const double n = static_cast<double>(r.n);
    r.win = static_cast<double>(win) / n;
    r.tie = static_cast<double>(tie) / n;
    r.loss = static_cast<double>(r.n - win - tie) / n;
    return r;
}

/// Ids ordered by descending score; equal scores fall back to id order.
inline std::vector<std::string> ranking(const std::map<std::string, double>& scores) {
    std::vector<std::string> ids;
    for (const auto& [id, s] : scores) ids.push_back(id);
    std::stable_sort(ids.begin(), ids.end(),
                     [&](const auto& a, const auto& b) { return scores.at(a) > scores.at(b); });
    return ids;
}

inline double precision_at_k(std::span<const std::string> predicted, std::span<const std::string> truth,
                             std::size_t k) {
    const std::set<std::string> a(predicted.begin(), predicted.end());
    const std::set<std::string> b(truth.begin(), truth.end());
    if (a != b || a.size() != predicted.size() || b.size() != truth.size())
        throw NumericError("precision@k: rankings must order the same distinct models");
    if (k < 1 || k > predicted.size()) throw NumericError("precision@k: k out of range");
    const std::set<std::string> top_pred(predicted.begin(), predicted.begin() + static_cast<long>(k));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += top_pred.count(truth[i]);
    return static_cast<double>(hits) / static_cast<double>(k);
}

/// Correlates two per-model score maps over their shared models.
inline CorrelationResult correlate_external_scores(const std::map<std::string, double>& scores,
                                                   const std::map<std::string, double>& external,
                                                   CorrelationKind kind) {
    std::vector<double> xs, ys;
    for (const auto& [id, s] : scores)
        if (auto it = external.find(id); it != external.end()) {
            xs.push_back(s);
            ys.push_back(it->second);
        }
    if (xs.size() < 3)
        throw NumericError("external correlation needs at least 3 shared models, found " +
                           std::to_string(xs.size()));
    return correlation(xs, ys, kind);
}

}  // namespace overton::stats
