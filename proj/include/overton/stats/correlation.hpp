#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "overton/error.hpp"

namespace overton::stats {

enum class CorrelationKind { pearson, spearman, kendall };

inline std::string to_string(CorrelationKind k) {
    switch (k) {
        case CorrelationKind::pearson: return "pearson";
        case CorrelationKind::spearman: return "spearman";
        case CorrelationKind::kendall: return "kendall";
    }
    return "?";
}

inline std::optional<CorrelationKind> parse_correlation_kind(std::string_view s) {
    if (s == "pearson") return CorrelationKind::pearson;
    if (s == "spearman") return CorrelationKind::spearman;
    if (s == "kendall") return CorrelationKind::kendall;
    return std::nullopt;
}

struct CorrelationResult {
    std::optional<double> r;  // empty when either input has zero variance
    std::optional<double> p;
    std::size_t n = 0;
    bool approximate = false;  // large-sample p-value on fewer than 10 points
    bool defined() const { return r.has_value(); }
};

/// 1-based ranks, tied values share the mean of their positions.
inline std::vector<double> midranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace detail {

inline std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double t_test_p(double r, std::size_t n) {
    if (n <= 2) return 1.0;
    if (std::abs(r) >= 1.0) return 0.0;
    const double df = static_cast<double>(n - 2);
    const double t = r * std::sqrt(df / (1 - r * r));
    boost::math::students_t dist(df);
    return 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

struct TieSums {
    double pairs = 0;    // sum t(t-1)/2
    double cubic = 0;    // sum t(t-1)(t-2)
    double v = 0;        // sum t(t-1)(2t+5)
};

inline TieSums tie_sums(std::span<const double> xs) {
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    TieSums s;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        s.pairs += t * (t - 1) / 2;
        s.cubic += t * (t - 1) * (t - 2);
        s.v += t * (t - 1) * (2 * t + 5);
        i = j;
    }
    return s;
}

}  // namespace detail

/// Kendall tau-b by pair counting. Returns empty when either side is constant.
inline std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    double concordant = 0, discordant = 0, tie_x = 0, tie_y = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) tie_x += 1;
            else if (dy == 0) tie_y += 1;
            else if ((dx > 0) == (dy > 0)) concordant += 1;
            else discordant += 1;
        }
    const double denom = std::sqrt((concordant + discordant + tie_x) * (concordant + discordant + tie_y));
    if (denom == 0) return std::nullopt;
    return (concordant - discordant) / denom;
}

inline CorrelationResult correlation(std::span<const double> xs, std::span<const double> ys,
                                     CorrelationKind kind) {
    if (xs.size() != ys.size()) throw NumericError("correlation: inputs differ in length");
    if (xs.size() < 3) throw NumericError("correlation: need at least 3 points");
    CorrelationResult out;
    out.n = xs.size();
    out.approximate = out.n < 10;
    switch (kind) {
        case CorrelationKind::pearson:
            out.r = detail::pearson_r(xs, ys);
            if (out.r) out.p = detail::t_test_p(*out.r, out.n);
            break;
        case CorrelationKind::spearman: {
            const auto rx = midranks(xs);
            const auto ry = midranks(ys);
            out.r = detail::pearson_r(rx, ry);
            if (out.r) out.p = detail::t_test_p(*out.r, out.n);
            break;
        }
        case CorrelationKind::kendall: {
            out.r = kendall_tau_b(xs, ys);
            if (!out.r) break;
            // Normal approximation to S = concordant - discordant with tie corrections.
            double s = 0;
            for (std::size_t i = 0; i < xs.size(); ++i)
                for (std::size_t j = i + 1; j < xs.size(); ++j) {
                    const double dx = xs[i] - xs[j], dy = ys[i] - ys[j];
                    if (dx * dy > 0) s += 1;
                    else if (dx * dy < 0) s -= 1;
                }
            const double n = static_cast<double>(out.n);
            const double m = n * (n - 1);
            const auto tx = detail::tie_sums(xs);
            const auto ty = detail::tie_sums(ys);
            const double var = (m * (2 * n + 5) - tx.v - ty.v) / 18 + 2 * tx.pairs * ty.pairs / m +
                               tx.cubic * ty.cubic / (9 * m * (n - 2));
            if (var <= 0) {
                out.p = 1.0;
            } else {
                const double z = s / std::sqrt(var);
                boost::math::normal dist;
                out.p = std::min(1.0, 2 * boost::math::cdf(boost::math::complement(dist, std::abs(z))));
            }
            break;
        }
    }
    return out;
}

}  // namespace overton::stats
