#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overton/cluster.hpp"
#include "overton/dataset.hpp"
#include "overton/format.hpp"
#include "overton/stats/anova.hpp"

namespace overton::diagnostics {

struct VoteCounts {
    std::size_t approve = 0;
    std::size_t disapprove = 0;
    std::size_t pass = 0;

    std::size_t total() const { return approve + disapprove + pass; }
    void add(VoteValue v) {
        if (v == VoteValue::agree) ++approve;
        else if (v == VoteValue::disagree) ++disapprove;
        else ++pass;
    }
    struct Rates {
        double approve, disapprove, pass;
    };
    std::optional<Rates> rates() const {
        if (!total()) return std::nullopt;
        const double n = static_cast<double>(total());
        return Rates{approve / n, disapprove / n, pass / n};
    }
};

struct ClusterCohesion {
    int cluster = 0;
    std::size_t size = 0;
    VoteCounts within;  // voter and author in this cluster
    VoteCounts out;     // voter in this cluster, author in another one
    /// Approvals over within votes; empty for singletons and clusters without within votes.
    std::optional<double> cohesion;
    bool no_within_votes = false;
};

struct QuestionCohesion {
    std::string question_id;
    std::vector<ClusterCohesion> clusters;
    std::size_t seed_votes_skipped = 0;
    std::size_t self_votes_skipped = 0;
    std::size_t unclustered_votes_skipped = 0;  // voter or author outside every cluster
};

/// Within- and out-of-cluster voting for one question. Only votes whose
/// voter and author are both clustered participants are counted.
inline QuestionCohesion cohesion(const cluster::ClusterSolution& solution, const Dataset& ds) {
    QuestionCohesion out;
    out.question_id = solution.question_id;
    const auto label = solution.assignment_map();
    for (int c = 0; c < solution.k; ++c) {
        ClusterCohesion cc;
        cc.cluster = c;
        cc.size = solution.cluster_sizes.at(static_cast<std::size_t>(c));
        out.clusters.push_back(cc);
    }
    for (const auto* v : ds.votes_for(solution.question_id)) {
        const auto* s = ds.find_statement(v->statement_id);
        if (s->is_seed()) {
            ++out.seed_votes_skipped;
            continue;
        }
        if (s->author_id == v->voter_id) {
            ++out.self_votes_skipped;
            continue;
        }
        auto voter = label.find(v->voter_id);
        auto author = label.find(s->author_id);
        if (voter == label.end() || author == label.end()) {
            ++out.unclustered_votes_skipped;
            continue;
        }
        auto& cc = out.clusters[static_cast<std::size_t>(voter->second)];
        (voter->second == author->second ? cc.within : cc.out).add(v->value);
    }
    for (auto& cc : out.clusters) {
        if (cc.size < 2) continue;
        if (!cc.within.total()) {
            cc.no_within_votes = true;
            continue;
        }
        cc.cohesion = static_cast<double>(cc.within.approve) / static_cast<double>(cc.within.total());
    }
    return out;
}

struct RateTriple {
    double approve = 0, disapprove = 0, pass = 0;
};

struct CohesionReport {
    std::vector<QuestionCohesion> questions;
    std::optional<double> mean_cohesion;  // over non-singleton clusters with within votes
    std::size_t clusters_in_mean = 0;
    std::size_t excluded_no_within = 0;
    std::optional<RateTriple> within;  // averaged over clusters with any such votes
    std::optional<RateTriple> out;
};

inline CohesionReport summarize_cohesion(std::vector<QuestionCohesion> questions) {
    CohesionReport r;
    double coh = 0;
    RateTriple win, wout;
    std::size_t n_in = 0, n_out = 0;
    for (const auto& q : questions)
        for (const auto& c : q.clusters) {
            if (c.cohesion) {
                coh += *c.cohesion;
                ++r.clusters_in_mean;
            }
            r.excluded_no_within += c.no_within_votes;
            if (auto x = c.within.rates()) {
                win.approve += x->approve;
                win.disapprove += x->disapprove;
                win.pass += x->pass;
                ++n_in;
            }
            if (auto x = c.out.rates()) {
                wout.approve += x->approve;
                wout.disapprove += x->disapprove;
                wout.pass += x->pass;
                ++n_out;
            }
        }
    if (r.clusters_in_mean) r.mean_cohesion = coh / static_cast<double>(r.clusters_in_mean);
    auto scale = [](RateTriple t, std::size_t n) {
        const double d = static_cast<double>(n);
        return RateTriple{t.approve / d, t.disapprove / d, t.pass / d};
    };
    if (n_in) r.within = scale(win, n_in);
    if (n_out) r.out = scale(wout, n_out);
    r.questions = std::move(questions);
    return r;
}

inline nlohmann::json to_json(const VoteCounts& v) {
    return {{"approve", v.approve}, {"disapprove", v.disapprove}, {"pass", v.pass}};
}

inline nlohmann::json to_json(const std::optional<RateTriple>& t) {
    if (!t) return nullptr;
    return {{"approve", t->approve}, {"disapprove", t->disapprove}, {"pass", t->pass}};
}

inline nlohmann::json to_json(const CohesionReport& r) {
    nlohmann::json qs = nlohmann::json::array();
    for (const auto& q : r.questions) {
        nlohmann::json cs = nlohmann::json::array();
        for (const auto& c : q.clusters)
            cs.push_back({{"cluster", c.cluster},
                          {"size", c.size},
                          {"within", to_json(c.within)},
                          {"out", to_json(c.out)},
                          {"cohesion", c.cohesion ? nlohmann::json(*c.cohesion) : nlohmann::json(nullptr)},
                          {"no_within_votes", c.no_within_votes}});
        qs.push_back({{"question_id", q.question_id},
                      {"clusters", cs},
                      {"seed_votes_skipped", q.seed_votes_skipped},
                      {"self_votes_skipped", q.self_votes_skipped},
                      {"unclustered_votes_skipped", q.unclustered_votes_skipped}});
    }
    return {{"mean_cohesion", r.mean_cohesion ? nlohmann::json(*r.mean_cohesion) : nlohmann::json(nullptr)},
            {"clusters_in_mean", r.clusters_in_mean},
            {"excluded_no_within", r.excluded_no_within},
            {"within", to_json(r.within)},
            {"out", to_json(r.out)},
            {"questions", qs}};
}

/// Three-column layout: vote type, within-cluster rate, out-of-cluster rate.
inline std::string cohesion_markdown(const CohesionReport& r) {
    auto cell = [](const std::optional<RateTriple>& t, double RateTriple::*f) {
        return t ? fmt::fixed((*t).*f) : std::string("n/a");
    };
    std::vector<std::vector<std::string>> rows{
        {"Approve", cell(r.within, &RateTriple::approve), cell(r.out, &RateTriple::approve)},
        {"Disapprove", cell(r.within, &RateTriple::disapprove), cell(r.out, &RateTriple::disapprove)},
        {"Pass", cell(r.within, &RateTriple::pass), cell(r.out, &RateTriple::pass)}};
    return fmt::table({"Vote", "Within cluster", "Out of cluster"}, rows) +
           "\nMean cohesion: " + fmt::fixed(r.mean_cohesion) + " over " + std::to_string(r.clusters_in_mean) +
           " non-singleton clusters\n";
}

// ---------------------------------------------------------------------------
// Parity

/// Signed prediction error for one rated datapoint.
struct ErrorDatapoint {
    std::string participant_id;
    std::string question_id;
    std::string model_id;
    double error = 0;  // predicted - human
};

inline const std::vector<std::string>& default_parity_categories() {
    static const std::vector<std::string> c{"sex", "ethnicity_simplified", "party", "model"};
    return c;
}

inline constexpr const char* kOtherGroup = "other";

struct ParityInput {
    std::string category;
    std::vector<std::string> labels;  // per datapoint
    std::vector<double> abs_errors;
    std::vector<double> sq_errors;
    std::vector<std::string> merged;  // groups folded into "other"
};

/// Groups per-datapoint errors by a demographic field (or by rated model).
/// Groups smaller than min_group_size are merged into "other".
inline std::vector<ParityInput> parity_inputs(std::span<const ErrorDatapoint> points, const Dataset& ds,
                                              const std::vector<std::string>& categories,
                                              std::size_t min_group_size = 1) {
    std::vector<ParityInput> out;
    for (const auto& cat : categories) {
        ParityInput in;
        in.category = cat;
        for (const auto& p : points) {
            if (cat == "model") {
                in.labels.push_back(p.model_id);
            } else {
                const auto* part = ds.find_participant(p.participant_id);
                if (!part) throw DataError(DataError::Kind::integrity, "parity: unknown participant " + p.participant_id);
                in.labels.push_back(demographic(*part, cat));
            }
            in.abs_errors.push_back(std::abs(p.error));
            in.sq_errors.push_back(p.error * p.error);
        }
        std::map<std::string, std::size_t> counts;
        for (const auto& l : in.labels) ++counts[l];
        for (const auto& [label, n] : counts)
            if (n < min_group_size && label != kOtherGroup) in.merged.push_back(label);
        if (!in.merged.empty()) {
            const std::set<std::string> small(in.merged.begin(), in.merged.end());
            for (auto& l : in.labels)
                if (small.count(l)) l = kOtherGroup;
        }
        out.push_back(std::move(in));
    }
    return out;
}

struct ParityResult {
    stats::PermutationAnovaResult mae;
    stats::PermutationAnovaResult mse;
    std::vector<std::string> merged;
};

/// Permutation ANOVA on absolute and squared errors for each category.
/// Categories with fewer than two groups are skipped.
inline std::vector<ParityResult> parity_tests(const std::vector<ParityInput>& inputs, std::size_t permutations,
                                              std::uint64_t seed, unsigned workers = 1) {
    std::vector<ParityResult> out;
    std::uint64_t stream = 0;
    for (const auto& in : inputs) {
        const std::set<std::string> groups(in.labels.begin(), in.labels.end());
        stream += 2;
        if (groups.size() < 2) continue;
        ParityResult r;
        auto run = [&](const std::vector<double>& v, const char* metric, std::uint64_t s) {
            stats::PermutationAnovaResult res;
            try {
                res = stats::permutation_anova(v, in.labels, permutations, s, stats::PermutationMode::random, workers);
            } catch (const NumericError&) {
                // All errors identical: no between-group signal to test.
                res.groups = groups.size();
                res.permutations = permutations;
                res.seed = s;
            }
            res.category = in.category;
            res.metric = metric;
            return res;
        };
        r.mae = run(in.abs_errors, "MAE", rng::mix(seed + stream));
        r.mse = run(in.sq_errors, "MSE", rng::mix(seed + stream + 1));
        r.merged = in.merged;
        out.push_back(std::move(r));
    }
    return out;
}

inline nlohmann::json to_json(const stats::PermutationAnovaResult& r) {
    return {{"category", r.category}, {"metric", r.metric},     {"F", std::isinf(r.f) ? nlohmann::json("inf") : nlohmann::json(r.f)},
            {"p_perm", r.p_perm},     {"eta_squared", r.eta_squared}, {"groups", r.groups},
            {"permutations", r.permutations}, {"seed", r.seed}, {"exact", r.exact}};
}

inline nlohmann::json to_json(const std::vector<ParityResult>& rs) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : rs) a.push_back({{"mae", to_json(r.mae)}, {"mse", to_json(r.mse)}, {"merged", r.merged}});
    return a;
}

inline std::string parity_markdown(const std::vector<ParityResult>& rs) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : rs)
        for (const auto* x : {&r.mae, &r.mse})
            rows.push_back({x->category, x->metric, fmt::fixed(x->f), fmt::pvalue(x->p_perm), fmt::fixed(x->eta_squared)});
    return fmt::table({"Category", "Metric", "F", "p (perm)", "eta^2"}, rows);
}

}  // namespace overton::diagnostics
