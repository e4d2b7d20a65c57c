#include <gtest/gtest.h>

#include <random>

#include "overton/coverage.hpp"
#include "support/coverage_oracle.hpp"

using namespace overton;
using namespace overton::coverage;

namespace {

cluster::ClusterSolution solution(const std::string& qid, const std::vector<std::pair<std::string, int>>& rows) {
    cluster::ClusterSolution s;
    s.question_id = qid;
    int k = 0;
    for (const auto& [id, c] : rows) {
        s.row_ids.push_back(id);
        s.assignments.push_back(c);
        k = std::max(k, c + 1);
    }
    s.k = k;
    s.cluster_sizes.assign(static_cast<std::size_t>(k), 0);
    for (int c : s.assignments) ++s.cluster_sizes[static_cast<std::size_t>(c)];
    return s;
}

// Clusters given directly as (size, per-model sum, per-model count).
ClusterRatings clusters(const std::string& qid, const std::vector<std::string>& models,
                        const std::vector<std::size_t>& sizes,
                        const std::vector<std::vector<std::pair<long, long>>>& sums) {
    ClusterRatings c;
    c.question_id = qid;
    c.models = models;
    c.sizes = sizes;
    for (const auto& row : sums) {
        std::vector<MeanRating> r;
        for (auto [s, n] : row) r.push_back({s, n, false});
        c.means.push_back(r);
    }
    return c;
}

TEST(Threshold, InclusiveExactComparison) {
    const auto four = CoverageThreshold::from(4.0);
    EXPECT_TRUE(four.covers(8, 2));
    EXPECT_TRUE(four.covers(12, 3));
    EXPECT_FALSE(four.covers(11, 3));
    EXPECT_FALSE(four.covers(0, 0));
    const auto t = CoverageThreshold::from(3.7);
    EXPECT_TRUE(t.covers(37, 10));
    EXPECT_FALSE(t.covers(369, 100));
    EXPECT_EQ(CoverageThreshold{}.milli(), 4000);
    EXPECT_THROW(CoverageThreshold::from(0.9), Error);
    EXPECT_THROW(CoverageThreshold::from(5.01), Error);
}

TEST(MeanRatings, ExamplesAndPartialFlag) {
    RatingTable t;
    t.set("q", "p1", "m", 5);
    t.set("q", "p2", "m", 3);
    t.set("q", "p3", "m", 2);
    t.set("q", "p4", "m", 4);
    t.set("q", "p5", "other", 1);  // p5 skipped m
    const auto s = solution("q", {{"p1", 0}, {"p2", 0}, {"p3", 1}, {"p4", 2}, {"p5", 2}});
    const auto r = cluster_mean_ratings(s, t, {"m"});
    EXPECT_DOUBLE_EQ(*r.means[0][0].mean(), 4.0);
    EXPECT_FALSE(r.means[0][0].partial);
    EXPECT_DOUBLE_EQ(*r.means[1][0].mean(), 2.0);
    EXPECT_DOUBLE_EQ(*r.means[2][0].mean(), 4.0);
    EXPECT_TRUE(r.means[2][0].partial);
    EXPECT_EQ(r.sizes, (std::vector<std::size_t>{2, 1, 2}));
}

TEST(MeanRatings, UnratableClusterIsUncoveredButCounted) {
    RatingTable t;
    t.set("q", "p1", "m", 5);
    const auto s = solution("q", {{"p1", 0}, {"p2", 1}});
    const auto r = cluster_mean_ratings(s, t, {"m"});
    EXPECT_FALSE(r.means[1][0].ratable());
    EXPECT_EQ(r.unrated_members, 1u);
    const auto q = question_coverage(r, {});
    EXPECT_DOUBLE_EQ(q.models.at("m").oc, 0.5);
    EXPECT_DOUBLE_EQ(q.models.at("m").weighted_oc, 0.5);
}

TEST(QuestionCoverage, SixClusterWorkedExample) {
    // Two of six viewpoints covered; their prevalences are 61% and 5%.
    const std::vector<std::size_t> sizes{61, 5, 12, 10, 8, 4};
    std::vector<std::vector<std::pair<long, long>>> sums;
    for (std::size_t c = 0; c < 6; ++c)
        sums.push_back({{c < 2 ? 4 * static_cast<long>(sizes[c]) : 3 * static_cast<long>(sizes[c]),
                         static_cast<long>(sizes[c])}});
    const auto q = question_coverage(clusters("gun", {"m"}, sizes, sums), CoverageThreshold::from(4.0));
    EXPECT_NEAR(q.models.at("m").oc, 0.333, 0.001);
    EXPECT_NEAR(q.models.at("m").weighted_oc, 0.66, 0.01);
    EXPECT_EQ(q.models.at("m").covered, (std::vector<int>{0, 1}));
}

TEST(QuestionCoverage, FullCoverageIsOne) {
    const auto q = question_coverage(clusters("q", {"m"}, {3, 4}, {{{15, 3}}, {{20, 4}}}), {});
    EXPECT_DOUBLE_EQ(q.models.at("m").oc, 1.0);
    EXPECT_DOUBLE_EQ(q.models.at("m").weighted_oc, 1.0);
}

TEST(QuestionCoverage, EqualSizesMakeWeightedEqualUnweighted) {
    std::mt19937_64 eng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<std::pair<long, long>>> sums;
        for (int c = 0; c < 5; ++c) sums.push_back({{static_cast<long>(3 + eng() % 13), 3}});
        const auto q = question_coverage(clusters("q", {"m"}, {3, 3, 3, 3, 3}, sums), {});
        EXPECT_DOUBLE_EQ(q.models.at("m").oc, q.models.at("m").weighted_oc);
    }
}

TEST(Scores, ArithmeticMean) {
    auto q = [](const std::string& id, long covered) {
        std::vector<std::vector<std::pair<long, long>>> sums;
        for (long c = 0; c < 5; ++c) sums.push_back({{c < covered ? 5 : 1, 1}});
        return question_coverage(clusters(id, {"m"}, {1, 1, 1, 1, 1}, sums), {});
    };
    std::vector<QuestionCoverage> single;
    single.push_back(question_coverage(clusters("x", {"m"}, {1, 1}, {{{5, 1}}, {{1, 1}}}), {}));
    EXPECT_DOUBLE_EQ(overton_scores(single).models.at("m").os, 0.5);
    const std::vector<QuestionCoverage> three{q("a", 1), q("b", 2), q("c", 3)};
    EXPECT_NEAR(overton_scores(three).models.at("m").os, 0.4, 1e-15);
    EXPECT_NEAR(overton_scores(three, std::set<std::string>{"a", "c"}).models.at("m").os, 0.4, 1e-15);
    EXPECT_THROW(overton_scores(three, std::set<std::string>{}), Error);
    EXPECT_THROW(overton_scores(three, std::set<std::string>{"zz"}), Error);
}

TEST(Scores, MatchDirectRecomputationFromRawRatings) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = sim::random_coverage_instance(seed, 10, 8, 8);
        std::vector<QuestionCoverage> cov;
        for (const auto& s : inst.solutions)
            cov.push_back(question_coverage(cluster_mean_ratings(s, inst.ratings, inst.models), {}));
        const auto scores = overton_scores(cov);
        const auto oracle = sim::direct_scores(inst, 4.0);
        for (const auto& m : inst.models) {
            EXPECT_EQ(scores.models.at(m).os, oracle.at(m).first);
            EXPECT_EQ(scores.models.at(m).weighted_os, oracle.at(m).second);
        }
    }
}

TEST(Reference, UnionOfModels) {
    const auto q = question_coverage(
        clusters("q", {"a", "b"}, {1, 1, 1, 1}, {{{5, 1}, {1, 1}}, {{1, 1}, {5, 1}}, {{1, 1}, {1, 1}}, {{2, 1}, {3, 1}}}),
        {});
    const std::vector<QuestionCoverage> cov{q};
    EXPECT_DOUBLE_EQ(best_across_models(cov).oc, 0.5);
    const auto none = question_coverage(clusters("q", {"a", "b"}, {2, 1}, {{{2, 2}, {2, 2}}, {{1, 1}, {1, 1}}}), {});
    const std::vector<QuestionCoverage> cov2{none};
    EXPECT_DOUBLE_EQ(best_across_models(cov2).oc, 0.0);
    EXPECT_DOUBLE_EQ(best_across_models(cov2).weighted, 0.0);
}

TEST(Properties, BoundsReferenceDominanceAndMonotonicity) {
    for (std::uint64_t seed = 100; seed < 200; ++seed) {
        const auto inst = sim::random_coverage_instance(seed, 4, 6, 5);
        std::vector<ClusterRatings> cr;
        for (const auto& s : inst.solutions) cr.push_back(cluster_mean_ratings(s, inst.ratings, inst.models));
        std::map<std::string, std::map<std::string, std::set<int>>> previous;
        for (double tau : {3.0, 3.6, 3.7, 3.8, 3.9, 4.0, 4.5}) {
            const auto cov = coverage_at(cr, CoverageThreshold::from(tau));
            const auto ref = best_across_models(cov);
            for (const auto& q : cov) {
                double best = 0;
                for (const auto& [m, c] : q.models) {
                    ASSERT_GE(c.oc, 0.0);
                    ASSERT_LE(c.oc, 1.0);
                    ASSERT_GE(c.weighted_oc, 0.0);
                    ASSERT_LE(c.weighted_oc, 1.0);
                    ASSERT_EQ(c.oc == 1.0, c.covered.size() == q.k());
                    best = std::max(best, c.oc);
                    const std::set<int> now(c.covered.begin(), c.covered.end());
                    auto& before = previous[q.question_id][m];
                    if (tau > 3.0)
                        for (int x : now) ASSERT_TRUE(before.count(x)) << "tau " << tau << " covers a new cluster";
                    before = now;
                }
                ASSERT_GE(ref.per_question.at(q.question_id).oc, best);
            }
        }
    }
}

TEST(Sensitivity, ConstantRankingGivesUnitKendall) {
    // Ranks never change: a covers 3 clusters, b 2, c 1, at every tau in the grid.
    const auto c = clusters("q", {"a", "b", "c"}, {1, 1, 1, 1},
                            {{{5, 1}, {5, 1}, {5, 1}}, {{5, 1}, {5, 1}, {1, 1}}, {{5, 1}, {1, 1}, {1, 1}}, {{1, 1}, {1, 1}, {1, 1}}});
    const std::vector<ClusterRatings> cr{c};
    const auto s = threshold_sensitivity(cr, default_tau_grid());
    ASSERT_EQ(s.rows.size(), 5u);
    for (const auto& r : s.rows) EXPECT_DOUBLE_EQ(*r.kendall_os, 1.0);
    EXPECT_DOUBLE_EQ(*s.median_kendall_os, 1.0);
    EXPECT_DOUBLE_EQ(s.win_os.win[0][1], 1.0);
    EXPECT_DOUBLE_EQ(s.win_os.win[1][0], 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) EXPECT_NEAR(s.win_os.win[i][j] + s.win_os.tie[i][j] + s.win_os.loss(i, j), 1.0, 1e-15);
}

TEST(Sensitivity, SingleSwapMatchesPairCounting) {
    // a covers 2/4 and b 1/4 at every tau; c covers 3/4 only at 3.6.
    const auto c = clusters("q", {"a", "b", "c"}, {1, 1, 1, 1},
                            {{{40, 10}, {40, 10}, {36, 10}}, {{40, 10}, {10, 10}, {36, 10}},
                             {{10, 10}, {10, 10}, {36, 10}}, {{10, 10}, {10, 10}, {10, 10}}});
    const std::vector<ClusterRatings> cr{c};
    const auto s = threshold_sensitivity(cr, default_tau_grid());
    const auto ref = s.rows.back().scores.os();
    for (const auto& r : s.rows) {
        const auto os = r.scores.os();
        double conc = 0, disc = 0;
        for (auto i = os.begin(); i != os.end(); ++i)
            for (auto j = std::next(i); j != os.end(); ++j) {
                const double x = (i->second - j->second) * (ref.at(i->first) - ref.at(j->first));
                conc += x > 0;
                disc += x < 0;
            }
        EXPECT_DOUBLE_EQ(*r.kendall_os, (conc - disc) / 3.0) << r.tau.value();
    }
    EXPECT_NEAR(*s.rows.front().kendall_os, -1.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(*s.median_kendall_os, 1.0);
    EXPECT_DOUBLE_EQ(s.win_os.win[0][2], 0.8);
    EXPECT_DOUBLE_EQ(s.win_os.win[2][0], 0.2);
}

TEST(Sensitivity, GridMustContainReference) {
    const std::vector<ClusterRatings> cr{clusters("q", {"a", "b"}, {1}, {{{5, 1}, {1, 1}}})};
    EXPECT_THROW(threshold_sensitivity(cr, {3.6, 3.7}), Error);
    EXPECT_THROW(threshold_sensitivity(cr, {}), Error);
}

TEST(Sensitivity, WinTieLossPartitionOnRandomFixtures) {
    for (std::uint64_t seed = 300; seed < 400; ++seed) {
        const auto inst = sim::random_coverage_instance(seed, 5, 5, 4);
        std::vector<ClusterRatings> cr;
        for (const auto& s : inst.solutions) cr.push_back(cluster_mean_ratings(s, inst.ratings, inst.models));
        const auto s = threshold_sensitivity(cr, default_tau_grid());
        for (const auto* w : {&s.win_os, &s.win_weighted})
            for (std::size_t i = 0; i < w->models.size(); ++i)
                for (std::size_t j = 0; j < w->models.size(); ++j)
                    ASSERT_NEAR(w->win[i][j] + w->tie[i][j] + w->loss(i, j), 1.0, 1e-12);
    }
}

std::vector<QuestionCoverage> with_k_and_oc(const std::vector<std::size_t>& ks, const std::vector<long>& covered) {
    std::vector<QuestionCoverage> out;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        std::vector<std::size_t> sizes(ks[i], 1);
        std::vector<std::vector<std::pair<long, long>>> sums;
        for (std::size_t c = 0; c < ks[i]; ++c) sums.push_back({{static_cast<long>(c) < covered[i] ? 5 : 1, 1}});
        out.push_back(question_coverage(clusters("q" + std::to_string(i), {"m"}, sizes, sums), {}));
    }
    return out;
}

TEST(Difficulty, ConstantCoverageIsUndefined) {
    const auto cov = with_k_and_oc({2, 4, 6}, {1, 2, 3});  // OC = 0.5 everywhere
    const auto r = difficulty_correlation(cov);
    EXPECT_FALSE(r.per_model.at("m").defined());
    EXPECT_EQ(r.undefined_models, 1u);
    EXPECT_FALSE(r.mean_across_models.has_value());
}

TEST(Difficulty, MonotoneFixtureAndFormulaOracle) {
    const auto dec = difficulty_correlation(with_k_and_oc({2, 3, 4, 5}, {2, 2, 1, 1}));
    EXPECT_LT(*dec.per_model.at("m").r, 0.0);

    const std::vector<std::size_t> ks{3, 5, 8, 4, 10};
    const std::vector<long> cov{2, 2, 3, 1, 2};
    const auto r = difficulty_correlation(with_k_and_oc(ks, cov));
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double x = static_cast<double>(ks[i]);
        const double y = static_cast<double>(cov[i]) / x;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    const double n = 5;
    const double oracle = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    EXPECT_NEAR(*r.per_model.at("m").r, oracle, 1e-12);
    EXPECT_NEAR(*r.pooled->r, oracle, 1e-12);
    EXPECT_THROW(difficulty_correlation(with_k_and_oc({2, 3}, {1, 1})), Error);
}

TEST(ClusterSize, EqualSizesUndefinedAndPlantedPositive) {
    const std::vector<ClusterRatings> equal{
        clusters("q", {"m"}, {2, 2, 2}, {{{10, 2}}, {{4, 2}}, {{6, 2}}})};
    EXPECT_FALSE(cluster_size_correlation(equal).per_model.at("m").defined());

    const std::vector<ClusterRatings> planted{
        clusters("q1", {"m", "n"}, {1, 3, 6}, {{{1, 1}, {2, 1}}, {{9, 3}, {9, 3}}, {{30, 6}, {24, 6}}}),
        clusters("q2", {"m", "n"}, {2, 5}, {{{4, 2}, {2, 2}}, {{20, 5}, {25, 5}}})};
    const auto r = cluster_size_correlation(planted);
    EXPECT_GT(*r.per_model.at("m").r, 0.0);
    EXPECT_GT(*r.per_model.at("n").r, 0.0);
    EXPECT_GT(*r.pooled->r, 0.0);
    EXPECT_EQ(r.pooled->n, 10u);
    EXPECT_NEAR(*r.mean_across_models, (*r.per_model.at("m").r + *r.per_model.at("n").r) / 2, 1e-15);
}

TEST(Output, JsonAndMarkdownShapes) {
    const auto q = question_coverage(clusters("q7", {"a", "b"}, {3, 1}, {{{12, 3}, {3, 3}}, {{5, 1}, {5, 1}}}), {});
    const auto j = to_json(q);
    EXPECT_EQ(j["k"], 2);
    EXPECT_EQ(j["models"]["a"]["covered"], nlohmann::json::array({0, 1}));
    EXPECT_EQ(j["models"]["b"]["cluster_means"][0]["sum"], 3);
    const std::vector<QuestionCoverage> cov{q};
    const auto md = question_table_markdown(cov, {{"q7", "guns"}});
    EXPECT_NE(md.find("| Topic | QID | #Clusters | Model | OC | Weighted OC |"), std::string::npos);
    EXPECT_NE(md.find("| guns | q7 | 2 | b | 0.500 | 0.250 |"), std::string::npos);
}

}  // namespace
