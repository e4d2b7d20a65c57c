#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "overton/stats/anova.hpp"
#include "overton/stats/correlation.hpp"
#include "overton/stats/ols.hpp"
#include "overton/stats/rates.hpp"
#include "overton/stats/resampling.hpp"
#include "support/oracles.hpp"

using namespace overton;
using namespace overton::stats;
using namespace overton::oracle;

namespace {

// ---------------------------------------------------------------------------
// Correlation

// Tau-b from the textbook definition: (C - D) / sqrt((n0 - n1)(n0 - n2)).
double tau_b_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double c = 0, d = 0, n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double s = (x[i] - x[j]) * (y[i] - y[j]);
            c += s > 0;
            d += s < 0;
            n1 += x[i] == x[j];
            n2 += y[i] == y[j];
        }
    const double n0 = n * (n - 1) / 2;
    return (c - d) / std::sqrt((n0 - n1) * (n0 - n2));
}

TEST(Correlation, TiedFixtureMatchesReferenceValues) {
    const std::vector<double> x{1, 2, 2, 3, 4, 4, 4, 5};
    const std::vector<double> y{2, 1, 3, 3, 5, 4, 6, 6};
    // Reference values computed with scipy.stats.
    auto p = correlation(x, y, CorrelationKind::pearson);
    EXPECT_NEAR(*p.r, 0.8767227853705734, 1e-12);
    EXPECT_NEAR(*p.p, 0.00426132570253361, 1e-10);
    EXPECT_TRUE(p.approximate);
    auto s = correlation(x, y, CorrelationKind::spearman);
    EXPECT_NEAR(*s.r, 0.9007775105401477, 1e-12);
    EXPECT_NEAR(*s.p, 0.0022640090646742633, 1e-10);
    auto k = correlation(x, y, CorrelationKind::kendall);
    EXPECT_NEAR(*k.r, 0.8006407690254358, 1e-12);
    EXPECT_NEAR(*k.p, 0.009191995862593751, 1e-10);
    EXPECT_NEAR(*k.r, tau_b_oracle(x, y), 1e-12);
}

TEST(Correlation, KendallNormalApproximationWithoutTies) {
    const std::vector<double> x{17, 86, 60, 77, 47, 3, 70, 47, 88, 92};
    const std::vector<double> y{70, 29, 85, 61, 80, 34, 60, 31, 73, 66};
    auto k = correlation(x, y, CorrelationKind::kendall);
    EXPECT_NEAR(*k.r, 0.04494665749754947, 1e-12);
    EXPECT_NEAR(*k.p, 0.8574624419592412, 1e-10);
    EXPECT_FALSE(k.approximate);
}

TEST(Correlation, KendallMatchesPairCountingOnRandomTiedData) {
    std::mt19937_64 eng(3);
    std::uniform_int_distribution<int> die(1, 4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(8), y(8);
        for (auto& v : x) v = die(eng);
        for (auto& v : y) v = die(eng);
        auto k = kendall_tau_b(x, y);
        if (!k) continue;
        EXPECT_NEAR(*k, tau_b_oracle(x, y), 1e-12);
    }
}

TEST(Correlation, IdenticalAndReversed) {
    const std::vector<double> x{0.3, 1.2, -4, 7, 2.5, 9};
    for (auto kind : {CorrelationKind::pearson, CorrelationKind::spearman, CorrelationKind::kendall})
        EXPECT_NEAR(*correlation(x, x, kind).r, 1.0, 1e-12);
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> reversed(sorted.rbegin(), sorted.rend());
    EXPECT_NEAR(*correlation(sorted, reversed, CorrelationKind::spearman).r, -1.0, 1e-12);
    EXPECT_NEAR(*correlation(sorted, reversed, CorrelationKind::kendall).r, -1.0, 1e-12);
}

TEST(Correlation, SpearmanIsPearsonOfRanksWithoutTies) {
    std::mt19937_64 eng(11);
    std::normal_distribution<double> z;
    std::vector<double> x(30), y(30);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = z(eng);
        y[i] = x[i] + z(eng);
    }
    const auto rx = midranks(x), ry = midranks(y);
    EXPECT_NEAR(*correlation(x, y, CorrelationKind::spearman).r,
                *correlation(rx, ry, CorrelationKind::pearson).r, 1e-12);
}

TEST(Correlation, MidranksAverageTies) {
    const std::vector<double> x{10, 20, 20, 5, 20};
    EXPECT_EQ(midranks(x), (std::vector<double>{2, 4, 4, 1, 4}));
}

TEST(Correlation, ZeroVarianceIsUndefined) {
    const std::vector<double> x{1, 2, 3, 4};
    const std::vector<double> c{2, 2, 2, 2};
    for (auto kind : {CorrelationKind::pearson, CorrelationKind::spearman, CorrelationKind::kendall}) {
        auto r = correlation(x, c, kind);
        EXPECT_FALSE(r.defined());
        EXPECT_FALSE(r.p.has_value());
    }
}

TEST(Correlation, RejectsShortOrUnequalInputs) {
    const std::vector<double> a{1, 2}, b{1, 2, 3};
    EXPECT_THROW(correlation(a, a, CorrelationKind::pearson), NumericError);
    EXPECT_THROW(correlation(a, b, CorrelationKind::pearson), NumericError);
}

// ---------------------------------------------------------------------------
// OLS

std::vector<CoverageObservation> additive(const std::vector<std::string>& models,
                                          const std::vector<double>& a,
                                          const std::vector<std::string>& questions,
                                          const std::vector<double>& b) {
    std::vector<CoverageObservation> obs;
    for (std::size_t m = 0; m < models.size(); ++m)
        for (std::size_t q = 0; q < questions.size(); ++q)
            obs.push_back({models[m], questions[q], a[m] + b[q]});
    return obs;
}

TEST(Ols, NoiselessAdditiveEffectsAreRecovered) {
    const std::vector<double> a{0.30, 0.45, 0.10, 0.25};
    const std::vector<double> b{0.05, -0.02, 0.20, 0.11, 0.0};
    const auto obs = additive({"m1", "m2", "m3", "m4"}, a, {"q1", "q2", "q3", "q4", "q5"}, b);
    const auto fit = fit_coverage_ols(obs);
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / 5;
    for (std::size_t m = 0; m < 4; ++m)
        EXPECT_NEAR(fit.adjusted.at("m" + std::to_string(m + 1)), a[m] + mean_b, 1e-10);
    EXPECT_EQ(fit.reference_question(), "q1");
    EXPECT_DOUBLE_EQ(fit.gamma.at("q1"), 0.0);
    EXPECT_LT(fit.residuals.norm(), 1e-12);
}

TEST(Ols, AdjustedScoresDoNotDependOnReferenceLevel) {
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<CoverageObservation> obs, renamed;
    for (int m = 0; m < 3; ++m)
        for (int q = 0; q < 6; ++q) {
            const double v = u(eng);
            obs.push_back({"m" + std::to_string(m), "q" + std::to_string(q), v});
            renamed.push_back({"m" + std::to_string(m), "z" + std::to_string(9 - q), v});
        }
    obs.pop_back();  // unbalanced on purpose
    renamed.pop_back();
    const auto a = fit_coverage_ols(obs);
    const auto b = fit_coverage_ols(renamed);
    EXPECT_NE(a.reference_question(), "q5");
    for (const auto& [m, v] : a.adjusted) EXPECT_NEAR(v, b.adjusted.at(m), 1e-12);
}

TEST(Ols, SingleQuestionGivesRawValues) {
    std::vector<CoverageObservation> obs{{"a", "q", 0.25}, {"b", "q", 0.75}, {"c", "q", 0.5}};
    const auto fit = fit_coverage_ols(obs);
    EXPECT_NEAR(fit.adjusted.at("a"), 0.25, 1e-12);
    EXPECT_NEAR(fit.adjusted.at("b"), 0.75, 1e-12);
    EXPECT_NEAR(fit.adjusted.at("c"), 0.5, 1e-12);
    EXPECT_THROW(cluster_robust_vcov(fit), NumericError);
}

TEST(Ols, IdenticalModelsGetIdenticalScores) {
    std::vector<CoverageObservation> obs;
    const double vals[] = {0.1, 0.7, 0.4};
    for (int q = 0; q < 3; ++q) {
        obs.push_back({"a", "q" + std::to_string(q), vals[q]});
        obs.push_back({"b", "q" + std::to_string(q), vals[q]});
        obs.push_back({"c", "q" + std::to_string(q), 0.3 * q});
    }
    const auto fit = fit_coverage_ols(obs);
    EXPECT_NEAR(fit.adjusted.at("a"), fit.adjusted.at("b"), 1e-12);
}

TEST(Ols, BalancedDesignPreservesRawDifferences) {
    std::mt19937_64 eng(8);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<CoverageObservation> obs;
    std::map<std::string, double> raw;
    for (int m = 0; m < 4; ++m)
        for (int q = 0; q < 7; ++q) {
            const double v = u(eng);
            obs.push_back({"m" + std::to_string(m), "q" + std::to_string(q), v});
            raw["m" + std::to_string(m)] += v / 7;
        }
    const auto fit = fit_coverage_ols(obs);
    for (const auto& [m, v] : raw) EXPECT_NEAR(fit.adjusted.at(m), v, 1e-10);
}

TEST(Ols, RankDeficiencyNamesColumns) {
    std::vector<CoverageObservation> obs{{"a", "q1", 0.2}, {"b", "q2", 0.4}};
    try {
        fit_coverage_ols(obs);
        FAIL() << "expected rank error";
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("collinear"), std::string::npos);
        EXPECT_NE(msg.find('['), std::string::npos);
    }
}

TEST(Ols, DuplicateCellRejected) {
    std::vector<CoverageObservation> obs{{"a", "q1", 0.2}, {"a", "q1", 0.4}, {"b", "q1", 0.1}};
    EXPECT_THROW(fit_coverage_ols(obs), NumericError);
}


std::vector<CoverageObservation> three_by_four() {
    const std::map<std::string, std::vector<double>> vals{
        {"A", {.5, .2, .7, .4}}, {"B", {.3, .3, .5, .1}}, {"C", {.9, .4, .6, .6}}};
    std::vector<CoverageObservation> obs;
    for (const auto& [m, v] : vals)
        for (int q = 0; q < 4; ++q) obs.push_back({m, "q" + std::to_string(q + 1), v[q]});
    return obs;
}

TEST(ClusterRobust, MatchesSandwichOracleOnThreeByFour) {
    const auto fit = fit_coverage_ols(three_by_four());
    const auto v = cluster_robust_vcov(fit);
    const auto oracle = sandwich_oracle(fit.X, fit.y, fit.cluster);
    EXPECT_LT((fit.coef - oracle.coef).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((v - oracle.vcov).cwiseAbs().maxCoeff(), 1e-10);
    // Model block as reported by statsmodels (cov_type="cluster").
    const double ref[3][3] = {{3.8618827160494099e-03, -9.7608024691354586e-04, -2.8858024691358307e-03},
                              {-9.7608024691354706e-04, 7.9359567901235110e-03, -6.9598765432099087e-03},
                              {-2.8858024691358320e-03, -6.9598765432099087e-03, 9.8456790123456588e-03}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(v(i, j), ref[i][j], 1e-12);
    EXPECT_NEAR(fit.beta.at("A"), 0.5583333333333333, 1e-12);
    EXPECT_NEAR(fit.gamma.at("q2"), -0.26666666666666705, 1e-12);
}

TEST(ClusterRobust, SymmetricPositiveSemidefinite) {
    std::mt19937_64 eng(21);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<CoverageObservation> obs;
    for (int m = 0; m < 4; ++m)
        for (int q = 0; q < 9; ++q) obs.push_back({"m" + std::to_string(m), "q" + std::to_string(q), u(eng)});
    const auto v = cluster_robust_vcov(fit_coverage_ols(obs));
    EXPECT_LT((v - v.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
}

TEST(ClusterRobust, ZeroResidualsGiveZeroMatrix) {
    const auto obs = additive({"a", "b", "c"}, {0.1, 0.2, 0.3}, {"x", "y", "z"}, {0.0, 0.1, 0.2});
    const auto v = cluster_robust_vcov(fit_coverage_ols(obs));
    EXPECT_LT(v.cwiseAbs().maxCoeff(), 1e-20);
}

TEST(ClusterRobust, SingletonClustersReduceToHeteroskedasticSandwich) {
    std::mt19937_64 eng(4);
    std::normal_distribution<double> z;
    RegressionFit fit;
    const int N = 12, K = 3;
    fit.X.resize(N, K);
    fit.y.resize(N);
    for (int i = 0; i < N; ++i) {
        fit.X(i, 0) = 1;
        fit.X(i, 1) = z(eng);
        fit.X(i, 2) = z(eng);
        fit.y(i) = z(eng);
        fit.cluster.push_back(i);
        fit.questions.push_back("q" + std::to_string(100 + i));
    }
    fit.coef = fit.X.colPivHouseholderQr().solve(fit.y);
    fit.residuals = fit.y - fit.X * fit.coef;
    const Eigen::MatrixXd inv = (fit.X.transpose() * fit.X).inverse();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(K, K);
    for (int i = 0; i < N; ++i)
        meat += fit.residuals(i) * fit.residuals(i) * fit.X.row(i).transpose() * fit.X.row(i);
    const Eigen::MatrixXd hc1 = double(N) / (N - K) * inv * meat * inv;
    EXPECT_LT((cluster_robust_vcov(fit) - hc1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GrandMean, ThreeByFourContrast) {
    const auto fit = fit_with_inference(three_by_four());
    ASSERT_EQ(fit.contrasts.size(), 3u);
    const auto& a = fit.contrasts[0];
    EXPECT_EQ(a.model_id, "A");
    // statsmodels coefficients and covariance with scipy's t on 3 df.
    EXPECT_NEAR(a.estimate, -0.008333333333333744, 1e-12);
    EXPECT_NEAR(a.se, 0.062144048114436426, 1e-12);
    EXPECT_NEAR(a.p, 0.9018163592699524, 1e-10);
}

TEST(GrandMean, ContrastsSumToZero) {
    std::mt19937_64 eng(9);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<CoverageObservation> obs;
    for (int m = 0; m < 5; ++m)
        for (int q = 0; q < 8; ++q) obs.push_back({"m" + std::to_string(m), "q" + std::to_string(q), u(eng)});
    const auto fit = fit_with_inference(obs);
    double sum = 0;
    for (const auto& c : fit.contrasts) sum += c.estimate;
    EXPECT_NEAR(sum, 0.0, 1e-12);
}

TEST(GrandMean, IdenticalModelsHaveZeroContrastAndUnitP) {
    std::vector<CoverageObservation> obs;
    const double vals[] = {0.2, 0.6, 0.3, 0.9};
    for (const char* m : {"a", "b", "c"})
        for (int q = 0; q < 4; ++q) obs.push_back({m, "q" + std::to_string(q), vals[q]});
    const auto fit = fit_with_inference(obs);
    for (const auto& c : fit.contrasts) {
        EXPECT_NEAR(c.estimate, 0.0, 1e-12);
        EXPECT_DOUBLE_EQ(c.p, 1.0);
    }
}

TEST(GrandMean, PlantedOutlierHasSmallestP) {
    std::mt19937_64 eng(13);
    std::normal_distribution<double> z(0, 0.03);
    std::vector<CoverageObservation> obs;
    for (int m = 0; m < 5; ++m)
        for (int q = 0; q < 12; ++q)
            obs.push_back({"m" + std::to_string(m), "q" + std::to_string(q),
                           0.3 + 0.02 * q + (m == 3 ? 0.2 : 0.0) + z(eng)});
    const auto fit = fit_with_inference(obs);
    const auto oracle = sandwich_oracle(fit.X, fit.y, fit.cluster);
    const auto best = std::min_element(fit.contrasts.begin(), fit.contrasts.end(),
                                       [](const auto& a, const auto& b) { return a.p < b.p; });
    EXPECT_EQ(best->model_id, "m3");
    for (std::size_t m = 0; m < 5; ++m) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(oracle.coef.size());
        for (std::size_t j = 0; j < 5; ++j) c(static_cast<Eigen::Index>(j)) = (j == m) - 0.2;
        EXPECT_NEAR(fit.contrasts[m].estimate, c.dot(oracle.coef), 1e-12);
        EXPECT_NEAR(fit.contrasts[m].se, std::sqrt(c.dot(oracle.vcov * c)), 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Bootstrap

TEST(Quantile, TypeSevenInterpolation) {
    EXPECT_DOUBLE_EQ(quantile_type7({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile_type7({4, 1, 3, 2, 5}, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(quantile_type7({10, 20}, 0.1), 11.0);
    EXPECT_DOUBLE_EQ(quantile_type7({7}, 0.9), 7.0);
}

TEST(Bootstrap, ZeroVarianceGivesZeroWidth) {
    std::vector<CoverageObservation> obs;
    for (const char* m : {"a", "b"})
        for (int q = 0; q < 5; ++q) obs.push_back({m, "q" + std::to_string(q), 0.4});
    const auto r = bootstrap_ci(obs, {.replicates = 200, .seed = 1});
    for (const auto& ci : r.intervals) {
        EXPECT_NEAR(ci.high - ci.low, 0.0, 1e-12);
        EXPECT_NEAR(ci.estimate, 0.4, 1e-12);
    }
}

TEST(Bootstrap, DeterministicAcrossRunsAndWorkers) {
    std::mt19937_64 eng(2);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<CoverageObservation> obs;
    for (int m = 0; m < 3; ++m)
        for (int q = 0; q < 10; ++q) obs.push_back({"m" + std::to_string(m), "q" + std::to_string(q), u(eng)});
    const auto a = bootstrap_ci(obs, {.replicates = 300, .seed = 77, .workers = 1});
    const auto b = bootstrap_ci(obs, {.replicates = 300, .seed = 77, .workers = 1});
    const auto c = bootstrap_ci(obs, {.replicates = 300, .seed = 77, .workers = 4});
    for (std::size_t m = 0; m < 3; ++m) {
        EXPECT_EQ(a.intervals[m].low, b.intervals[m].low);
        EXPECT_EQ(a.intervals[m].high, b.intervals[m].high);
        EXPECT_EQ(a.intervals[m].low, c.intervals[m].low);
        EXPECT_EQ(a.intervals[m].high, c.intervals[m].high);
    }
    const auto d = bootstrap_ci(obs, {.replicates = 300, .seed = 78});
    EXPECT_NE(a.intervals[0].low, d.intervals[0].low);
}

TEST(Bootstrap, FewReplicatesRaiseWarning) {
    const auto obs = three_by_four();
    EXPECT_TRUE(bootstrap_ci(obs, {.replicates = 50, .seed = 1}).low_replicates);
    EXPECT_FALSE(bootstrap_ci(obs, {.replicates = 100, .seed = 1}).low_replicates);
}

TEST(Bootstrap, CalibrationAgainstKnownTruth) {
    // OC(m, q) = a_m + b_q + e with b_q ~ N(0, 0.1): the population adjusted
    // score is a_m, since E[b_q] = 0.
    const std::vector<double> a{0.3, 0.4, 0.5};
    std::size_t covered = 0, total = 0;
    for (int rep = 0; rep < 200; ++rep) {
        std::mt19937_64 eng(1000 + rep);
        std::normal_distribution<double> qeff(0, 0.1), noise(0, 0.05);
        std::vector<CoverageObservation> obs;
        for (int q = 0; q < 30; ++q) {
            const double b = qeff(eng);
            for (std::size_t m = 0; m < a.size(); ++m)
                obs.push_back({"m" + std::to_string(m), "q" + std::to_string(q), a[m] + b + noise(eng)});
        }
        const auto r = bootstrap_ci(obs, {.replicates = 300, .seed = static_cast<std::uint64_t>(rep)});
        for (std::size_t m = 0; m < a.size(); ++m) {
            ++total;
            covered += r.intervals[m].low <= a[m] && a[m] <= r.intervals[m].high;
        }
    }
    EXPECT_GE(static_cast<double>(covered) / static_cast<double>(total), 0.85);
}

TEST(Bootstrap, StatisticHelperIsDeterministic) {
    std::vector<double> x{1, 4, 2, 8, 5, 7};
    auto mean_of = [&](std::span<const std::size_t> idx) {
        double s = 0;
        for (auto i : idx) s += x[i];
        return s / static_cast<double>(idx.size());
    };
    const auto a = bootstrap_statistic(x.size(), {.replicates = 500, .seed = 3}, mean_of);
    const auto b = bootstrap_statistic(x.size(), {.replicates = 500, .seed = 3, .workers = 3}, mean_of);
    EXPECT_EQ(a.low, b.low);
    EXPECT_EQ(a.high, b.high);
    EXPECT_LE(a.low, 4.5);
    EXPECT_GE(a.high, 4.5);
}

// ---------------------------------------------------------------------------
// Permutation ANOVA


TEST(PermutationAnova, ExhaustiveMatchesEnumerationOracle) {
    std::mt19937_64 eng(31);
    std::uniform_int_distribution<int> die(0, 4);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 4 + trial % 3;
        std::vector<double> v(n);
        std::vector<std::string> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = die(eng);
            labels[i] = i < 2 ? std::string(1, char('a' + i)) : std::string(1, char('a' + die(eng) % 3));
        }
        if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) continue;
        const auto r = permutation_anova(v, labels, 0, 0, PermutationMode::exhaustive);
        EXPECT_TRUE(r.exact);
        EXPECT_DOUBLE_EQ(r.p_perm, exhaustive_p_oracle(v, labels));
        const double f = f_oracle(v, labels);
        if (std::isinf(f)) EXPECT_TRUE(std::isinf(r.f));
        else EXPECT_NEAR(r.f, f, 1e-9 * std::max(1.0, f));
    }
}

TEST(PermutationAnova, SixPointExhaustiveCount) {
    const std::vector<double> v{1, 2, 3, 10, 11, 12};
    const std::vector<std::string> g{"x", "x", "x", "y", "y", "y"};
    const auto r = permutation_anova(v, g, 0, 0, PermutationMode::exhaustive);
    EXPECT_EQ(r.permutations, 720u);
    // Only the two label-preserving splits (x/y and its mirror) reach F_obs,
    // each realized by 3! * 3! orderings.
    EXPECT_DOUBLE_EQ(r.p_perm, 72.0 / 720.0);
}

TEST(PermutationAnova, SeparableGroupsHitTheFloor) {
    std::vector<double> v;
    std::vector<std::string> g;
    for (int i = 0; i < 10; ++i) {
        v.push_back(i * 0.1);
        g.push_back("low");
        v.push_back(5 + i * 0.1);
        g.push_back("high");
    }
    const auto r = permutation_anova(v, g, 999, 4);
    EXPECT_DOUBLE_EQ(r.p_perm, 1.0 / 1000.0);
    EXPECT_GT(r.eta_squared, 0.9);
}

TEST(PermutationAnova, EtaSquaredBoundedAndPFloored) {
    std::mt19937_64 eng(17);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> v(12);
        std::vector<std::string> g(12);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = z(eng);
            g[i] = std::string(1, char('a' + i % 3));
        }
        const auto r = permutation_anova(v, g, 20, static_cast<std::uint64_t>(trial));
        ASSERT_GE(r.eta_squared, 0.0);
        ASSERT_LE(r.eta_squared, 1.0);
        ASSERT_GE(r.p_perm, 1.0 / 21.0);
        ASSERT_LE(r.p_perm, 1.0);
    }
}

TEST(PermutationAnova, NullCalibration) {
    std::mt19937_64 eng(23);
    std::normal_distribution<double> z;
    int above = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(40);
        std::vector<std::string> g(40);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = std::abs(z(eng));
            g[i] = i % 2 ? "f" : "m";
        }
        above += permutation_anova(v, g, 199, static_cast<std::uint64_t>(trial)).p_perm > 0.05;
    }
    EXPECT_GE(above, 90);
}

TEST(PermutationAnova, DeterministicAcrossWorkers) {
    std::vector<double> v{0.1, 0.5, 0.2, 0.9, 0.4, 0.3, 0.8, 0.7};
    std::vector<std::string> g{"a", "b", "a", "b", "c", "c", "b", "a"};
    const auto a = permutation_anova(v, g, 500, 9, PermutationMode::random, 1);
    const auto b = permutation_anova(v, g, 500, 9, PermutationMode::random, 3);
    EXPECT_EQ(a.p_perm, b.p_perm);
}

TEST(PermutationAnova, Errors) {
    const std::vector<double> same{1, 1, 1, 1};
    const std::vector<std::string> g2{"a", "a", "b", "b"}, g1{"a", "a", "a", "a"};
    EXPECT_THROW(permutation_anova(same, g2, 10, 0), NumericError);
    const std::vector<double> v{1, 2, 3, 4};
    EXPECT_THROW(permutation_anova(v, g1, 10, 0), NumericError);
}

// ---------------------------------------------------------------------------
// Rates and rankings

TEST(WinTie, Basics) {
    const std::vector<double> a{1, 0, 2, 1};
    auto r = win_tie_rates(a, a);
    EXPECT_DOUBLE_EQ(r.tie, 1.0);
    const std::vector<double> worse{2, 1, 3, -2};
    r = win_tie_rates(a, worse);
    EXPECT_DOUBLE_EQ(r.win, 1.0);
    EXPECT_THROW(win_tie_rates(std::vector<double>{}, std::vector<double>{}), NumericError);
}

TEST(WinTie, MixedTenPointHandCount) {
    const std::vector<double> a{0, 1, -2, 1, 0, 3, -1, 0, 2, 1};
    const std::vector<double> b{1, 1, 1, -1, 0, 2, 2, -1, -2, 0};
    // |a|<|b|: 0,6,7 -> 3 wins; equal: 1,3,4,8 -> 4 ties; losses: 2,5,9.
    const auto r = win_tie_rates(a, b);
    EXPECT_DOUBLE_EQ(r.win, 0.3);
    EXPECT_DOUBLE_EQ(r.tie, 0.4);
    EXPECT_DOUBLE_EQ(r.loss, 0.3);
    EXPECT_NEAR(r.win + r.tie + r.loss, 1.0, 1e-15);
}

TEST(PrecisionAtK, HumanVersusJudgeRankings) {
    // Adjusted scores from the human benchmark and from judge predictions.
    const std::map<std::string, double> human{{"o4-mini", 0.358}, {"deepseek-r1", 0.309},
                                              {"llama-3.3", 0.289}, {"gemma-3", 0.282},
                                              {"gpt-4.1", 0.268},  {"llama-4", 0.261},
                                              {"claude-3.7", 0.226}, {"deepseek-v3", 0.219}};
    const std::map<std::string, double> judge{{"claude-3.7", 0.329}, {"o4-mini", 0.299},
                                              {"gemma-3", 0.292},    {"deepseek-r1", 0.262},
                                              {"llama-4", 0.254},    {"llama-3.3", 0.226},
                                              {"deepseek-v3", 0.224}, {"gpt-4.1", 0.197}};
    const auto t = ranking(human), p = ranking(judge);
    EXPECT_DOUBLE_EQ(precision_at_k(p, t, 2), 0.5);
    EXPECT_DOUBLE_EQ(precision_at_k(p, t, 4), 0.75);
    EXPECT_NEAR(precision_at_k(p, t, 6), 0.83, 0.005);
}

TEST(PrecisionAtK, TrivialCases) {
    const std::vector<std::string> a{"a", "b", "c", "d"}, b{"c", "d", "a", "b"};
    for (std::size_t k = 1; k <= 4; ++k) EXPECT_DOUBLE_EQ(precision_at_k(a, a, k), 1.0);
    EXPECT_DOUBLE_EQ(precision_at_k(a, b, 2), 0.0);
    EXPECT_THROW(precision_at_k(a, b, 0), NumericError);
    EXPECT_THROW(precision_at_k(a, std::vector<std::string>{"a", "b", "c", "e"}, 2), NumericError);
}

TEST(ExternalScores, SlantComparison) {
    const std::map<std::string, double> os{{"o4-mini", 0.358}, {"deepseek-r1", 0.309},
                                           {"llama-3.3", 0.289}, {"gemma-3", 0.282},
                                           {"gpt-4.1", 0.268},  {"llama-4", 0.261},
                                           {"claude-3.7", 0.226}, {"deepseek-v3", 0.2}};
    const std::map<std::string, double> slant{{"o4-mini", -0.1204}, {"deepseek-r1", -0.0681},
                                              {"llama-3.3", -0.0803}, {"gemma-3", -0.0427},
                                              {"gpt-4.1", -0.1154},  {"llama-4", -0.0949},
                                              {"claude-3.7", -0.0619}};
    const auto p = correlate_external_scores(os, slant, CorrelationKind::pearson);
    EXPECT_EQ(p.n, 7u);
    EXPECT_NEAR(*p.r, -0.41, 0.01);
    EXPECT_NEAR(*correlate_external_scores(os, slant, CorrelationKind::spearman).r, -0.32, 0.01);
    EXPECT_NEAR(*correlate_external_scores(os, slant, CorrelationKind::kendall).r, -0.24, 0.01);
    EXPECT_NEAR(*correlate_external_scores(os, os, CorrelationKind::pearson).r, 1.0, 1e-12);
}

TEST(ExternalScores, AntiMonotoneAndTooFewShared) {
    const std::map<std::string, double> a{{"x", 1}, {"y", 2}, {"z", 3}, {"w", 4}};
    const std::map<std::string, double> b{{"x", 9}, {"y", 5}, {"z", 4}, {"w", -1}};
    EXPECT_NEAR(*correlate_external_scores(a, b, CorrelationKind::spearman).r, -1.0, 1e-12);
    const std::map<std::string, double> c{{"x", 1}, {"q", 2}, {"r", 3}};
    EXPECT_THROW(correlate_external_scores(a, c, CorrelationKind::pearson), NumericError);
}

}  // namespace
