#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "overton/error.hpp"
#include "overton/parallel.hpp"
#include "overton/rng.hpp"
#include "overton/stats/ols.hpp"

namespace overton::stats {

/// Linear-interpolation quantile of a sample (R type 7).
inline double quantile_type7(std::vector<double> values, double prob) {
    if (values.empty()) throw NumericError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

struct Interval {
    double low = 0;
    double high = 0;
};

inline Interval percentile_interval(const std::vector<double>& values, double level = 0.95) {
    const double tail = (1 - level) / 2;
    return {quantile_type7(values, tail), quantile_type7(values, 1 - tail)};
}

struct BootstrapOptions {
    std::size_t replicates = 2000;
    std::uint64_t seed = 0;
    double level = 0.95;
    unsigned workers = 1;
};

inline constexpr std::size_t kMinReplicates = 100;

struct ModelInterval {
    std::string model_id;
    double estimate = 0;
    double low = 0;
    double high = 0;
};

struct BootstrapResult {
    std::vector<ModelInterval> intervals;  // sorted by model id
    std::size_t replicates = 0;
    std::size_t failed = 0;  // rank-deficient resamples, skipped
    std::uint64_t seed = 0;
    bool low_replicates = false;
};

/// Question-level bootstrap of adjusted scores. Each replicate draws G
/// questions with replacement; repeated draws enter as distinct clusters.
inline BootstrapResult bootstrap_ci(std::span<const CoverageObservation> obs,
                                    const BootstrapOptions& opt) {
    std::map<std::string, std::vector<const CoverageObservation*>> by_question;
    for (const auto& o : obs) by_question[o.question_id].push_back(&o);
    if (by_question.size() < 2) throw NumericError("bootstrap needs at least 2 questions");
    std::vector<const std::vector<const CoverageObservation*>*> groups;
    for (const auto& [q, rows] : by_question) groups.push_back(&rows);

    const auto full = fit_coverage_ols(obs);
    const std::size_t G = groups.size();
    const std::size_t M = full.models.size();

    std::vector<std::optional<std::vector<double>>> draws(opt.replicates);
    parallel_for(opt.replicates, opt.workers, [&](std::size_t r) {
        auto eng = rng::substream(opt.seed, r);
        std::vector<CoverageObservation> sample;
        for (std::size_t g = 0; g < G; ++g) {
            const auto pick = static_cast<std::size_t>(rng::below(eng, G));
            const std::string label = "b" + std::to_string(g);
            for (const auto* o : *groups[pick]) sample.push_back({o->model_id, label, o->value});
        }
        try {
            const auto fit = fit_coverage_ols(sample);
            if (fit.models.size() != M) return;
            std::vector<double> adj;
            for (const auto& m : full.models) adj.push_back(fit.adjusted.at(m));
            draws[r] = std::move(adj);
        } catch (const NumericError&) {
        }
    });

    BootstrapResult out;
    out.replicates = opt.replicates;
    out.seed = opt.seed;
    out.low_replicates = opt.replicates < kMinReplicates;
    std::vector<std::vector<double>> per_model(M);
    for (const auto& d : draws) {
        if (!d) {
            ++out.failed;
            continue;
        }
        for (std::size_t m = 0; m < M; ++m) per_model[m].push_back((*d)[m]);
    }
    if (out.failed == opt.replicates) throw NumericError("bootstrap: every replicate was rank-deficient");
    for (std::size_t m = 0; m < M; ++m) {
        const auto ci = percentile_interval(per_model[m], opt.level);
        out.intervals.push_back({full.models[m], full.adjusted.at(full.models[m]), ci.low, ci.high});
    }
    return out;
}

/// Percentile CI for a statistic of n datapoints under row resampling.
/// `stat` receives the drawn indices.
inline Interval bootstrap_statistic(std::size_t n, const BootstrapOptions& opt,
                                    const std::function<double(std::span<const std::size_t>)>& stat) {
    if (n == 0) throw NumericError("bootstrap of an empty sample");
    std::vector<double> values(opt.replicates);
    parallel_for(opt.replicates, opt.workers, [&](std::size_t r) {
        auto eng = rng::substream(opt.seed, r);
        std::vector<std::size_t> idx(n);
        for (auto& i : idx) i = static_cast<std::size_t>(rng::below(eng, n));
        values[r] = stat(idx);
    });
    return percentile_interval(values, opt.level);
}

}  // namespace overton::stats
