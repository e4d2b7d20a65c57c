#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overton/cluster.hpp"
#include "overton/coverage.hpp"
#include "overton/dataset.hpp"
#include "overton/diagnostics.hpp"
#include "overton/format.hpp"
#include "overton/hash.hpp"
#include "overton/judge.hpp"
#include "overton/rng.hpp"
#include "overton/stats/correlation.hpp"
#include "overton/stats/ols.hpp"
#include "overton/stats/rates.hpp"
#include "overton/stats/resampling.hpp"
#include "overton/vote_matrix.hpp"

#ifndef OVERTON_VERSION
#define OVERTON_VERSION "0.0.0"
#endif

namespace overton::pipeline {

inline constexpr int kReportFormat = 1;

struct GridSpec {
    std::vector<int> k_max{10, 20};
    std::vector<double> distance_threshold{0.5, 0.7, 0.9};
    std::vector<double> outlier_threshold{0.2, 0.6, 1.0};
    std::vector<int> min_cluster_size{1, 3, 5};
    int seeds = 5;

    std::vector<cluster::ClusterConfig> expand(std::uint64_t base_seed) const {
        std::vector<cluster::ClusterConfig> grid;
        for (int k : k_max)
            for (double d : distance_threshold)
                for (double o : outlier_threshold)
                    for (int m : min_cluster_size)
                        for (int s = 0; s < seeds; ++s)
                            grid.push_back({k, d, o, m, base_seed + static_cast<std::uint64_t>(s)});
        return grid;
    }
};

struct JudgeSection {
    std::string endpoint;  // empty disables the judge stage
    std::string model;
    double temperature = 0.0;
    unsigned max_in_flight = 4;
    int max_retries = 4;
    int backoff_ms = 500;
    int timeout_s = 120;
    int runs = 3;
    std::vector<std::string> variants{"FS+FR"};
    std::string embedding_endpoint = "stub:hashing";
    std::string embedding_model;
    std::size_t embedding_dimension = 0;
    std::size_t parity_min_group = 5;
};

struct RunConfig {
    std::string manifest;
    std::string out = "overton-out";
    std::string subset = "all";  // all | model_slant | prism
    GridSpec grid;
    double tau = 4.0;
    std::vector<double> tau_grid = coverage::default_tau_grid();
    std::size_t bootstrap_reps = 2000;
    std::size_t permutations = 10000;
    std::uint64_t seed = 0;
    JudgeSection judge;
    std::map<std::string, double> external_scores;  // per-model score to correlate with OS
    unsigned workers = 1;
};

/// Stage seeds, all derived from the master seed.
struct Seeds {
    std::uint64_t cluster, bootstrap_oc, bootstrap_weighted, parity, prompts, judge_eval;
    explicit Seeds(std::uint64_t s)
        : cluster(s), bootstrap_oc(rng::mix(s + 1)), bootstrap_weighted(rng::mix(s + 2)), parity(rng::mix(s + 3)),
          prompts(rng::mix(s + 4)), judge_eval(rng::mix(s + 5)) {}
};

inline nlohmann::json to_json(const Seeds& s) {
    return {{"cluster_grid", s.cluster},   {"bootstrap_oc", s.bootstrap_oc}, {"bootstrap_weighted", s.bootstrap_weighted},
            {"parity", s.parity},          {"prompts", s.prompts},           {"judge_eval", s.judge_eval}};
}

// ---------------------------------------------------------------------------
// Configuration

/// Config echo. Output location and worker count are left out: neither
/// changes any result.
inline nlohmann::json to_json(const RunConfig& c) {
    return {{"manifest", c.manifest},
            {"subset", c.subset},
            {"tau", c.tau},
            {"tau_grid", c.tau_grid},
            {"bootstrap_reps", c.bootstrap_reps},
            {"permutations", c.permutations},
            {"seed", c.seed},
            {"grid",
             {{"k_max", c.grid.k_max},
              {"distance_threshold", c.grid.distance_threshold},
              {"outlier_threshold", c.grid.outlier_threshold},
              {"min_cluster_size", c.grid.min_cluster_size},
              {"seeds", c.grid.seeds}}},
            {"judge",
             {{"endpoint", c.judge.endpoint},
              {"model", c.judge.model},
              {"temperature", c.judge.temperature},
              {"max_in_flight", c.judge.max_in_flight},
              {"max_retries", c.judge.max_retries},
              {"backoff_ms", c.judge.backoff_ms},
              {"timeout_s", c.judge.timeout_s},
              {"runs", c.judge.runs},
              {"variants", c.judge.variants},
              {"embedding_endpoint", c.judge.embedding_endpoint},
              {"embedding_model", c.judge.embedding_model},
              {"embedding_dimension", c.judge.embedding_dimension},
              {"parity_min_group", c.judge.parity_min_group}}},
            {"external_scores", c.external_scores}};
}

namespace detail {

inline bool looks_like_secret(const std::string& key) {
    for (const char* s : {"api_key", "apikey", "token", "secret", "password"})
        if (key.find(s) != std::string::npos) return true;
    return false;
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [k, v] : j.items()) {
        if (looks_like_secret(k))
            throw Error("config: '" + k + "' looks like a credential; API keys come from environment variables only (" +
                        judge::kJudgeKeyEnv + ", " + judge::kEmbeddingKeyEnv + ")");
        if (!known.count(k)) throw Error("config: unknown key '" + where + k + "'");
    }
}

}  // namespace detail

/// Overlays a JSON config onto `base`. Unknown keys are rejected, and so is
/// anything that looks like a credential.
inline RunConfig apply_config(RunConfig c, const nlohmann::json& j) {
    detail::check_keys(j,
                       {"manifest", "out", "subset", "tau", "tau_grid", "bootstrap_reps", "permutations", "seed", "grid",
                        "judge", "external_scores", "workers"},
                       "");
    detail::take(j, "manifest", c.manifest);
    detail::take(j, "out", c.out);
    detail::take(j, "subset", c.subset);
    detail::take(j, "tau", c.tau);
    detail::take(j, "tau_grid", c.tau_grid);
    detail::take(j, "bootstrap_reps", c.bootstrap_reps);
    detail::take(j, "permutations", c.permutations);
    detail::take(j, "seed", c.seed);
    detail::take(j, "external_scores", c.external_scores);
    detail::take(j, "workers", c.workers);
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::check_keys(g, {"k_max", "distance_threshold", "outlier_threshold", "min_cluster_size", "seeds"}, "grid.");
        detail::take(g, "k_max", c.grid.k_max);
        detail::take(g, "distance_threshold", c.grid.distance_threshold);
        detail::take(g, "outlier_threshold", c.grid.outlier_threshold);
        detail::take(g, "min_cluster_size", c.grid.min_cluster_size);
        detail::take(g, "seeds", c.grid.seeds);
    }
    if (j.contains("judge")) {
        const auto& g = j.at("judge");
        detail::check_keys(g,
                           {"endpoint", "model", "temperature", "max_in_flight", "max_retries", "backoff_ms", "timeout_s",
                            "runs", "variants", "embedding_endpoint", "embedding_model", "embedding_dimension",
                            "parity_min_group"},
                           "judge.");
        auto& J = c.judge;
        detail::take(g, "endpoint", J.endpoint);
        detail::take(g, "model", J.model);
        detail::take(g, "temperature", J.temperature);
        detail::take(g, "max_in_flight", J.max_in_flight);
        detail::take(g, "max_retries", J.max_retries);
        detail::take(g, "backoff_ms", J.backoff_ms);
        detail::take(g, "timeout_s", J.timeout_s);
        detail::take(g, "runs", J.runs);
        detail::take(g, "variants", J.variants);
        detail::take(g, "embedding_endpoint", J.embedding_endpoint);
        detail::take(g, "embedding_model", J.embedding_model);
        detail::take(g, "embedding_dimension", J.embedding_dimension);
        detail::take(g, "parity_min_group", J.parity_min_group);
    }
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw DataError(DataError::Kind::missing_file, "config file not found: " + path.string());
    try {
        return apply_config(std::move(base), nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error("config " + path.string() + ": " + e.what());
    }
}

inline void validate_config(const RunConfig& c) {
    if (c.manifest.empty()) throw Error("config: manifest path is required");
    if (!std::filesystem::exists(c.manifest))
        throw DataError(DataError::Kind::missing_file, "manifest not found: " + c.manifest);
    if (c.subset != "all" && c.subset != "model_slant" && c.subset != "prism")
        throw Error("config: subset must be all, model_slant or prism");
    coverage::CoverageThreshold::from(c.tau);
    for (double t : c.tau_grid) coverage::CoverageThreshold::from(t);
    if (c.judge.runs < 1) throw Error("config: judge.runs must be >= 1");
    for (const auto& v : c.judge.variants)
        if (!judge::parse_variant(v)) throw Error("config: unknown prompt variant '" + v + "'");
    if (c.grid.seeds < 1) throw Error("config: grid.seeds must be >= 1");
}

// ---------------------------------------------------------------------------
// Stages

inline std::set<std::string> subset_questions(const Dataset& ds, const std::string& subset) {
    std::set<std::string> out;
    for (const auto& q : ds.questions())
        if (subset == "all" || to_string(q.source) == subset) out.insert(q.id);
    if (out.empty()) throw Error("subset '" + subset + "' selects no questions");
    return out;
}

struct ClusterStage {
    std::vector<cluster::ClusterSolution> solutions;  // question id order
    std::size_t cache_hits = 0;
    std::size_t computed = 0;
};

/// One solution per question. Solutions are cached under a hash of (vote
/// matrix, grid) and copied to <out>/clusters/<question>.json.
inline ClusterStage run_cluster_stage(const RunConfig& cfg, const Dataset& ds, std::ostream& log) {
    namespace fs = std::filesystem;
    const fs::path cache_dir = fs::path(cfg.out) / "cache" / "clusters";
    const fs::path out_dir = fs::path(cfg.out) / "clusters";
    fs::create_directories(cache_dir);
    fs::create_directories(out_dir);
    const auto grid = cfg.grid.expand(Seeds(cfg.seed).cluster);
    ClusterStage st;
    for (const auto& q : ds.questions()) {
        const auto m = build_vote_matrix(ds, q.id);
        const auto key = cluster::cache_key(m, grid);
        const auto file = cache_dir / (key + ".json");
        cluster::ClusterSolution s;
        if (fs::exists(file)) {
            std::ifstream in(file);
            s = cluster::solution_from_json(nlohmann::json::parse(in));
            ++st.cache_hits;
            log << "cluster " << q.id << ": cache hit " << key.substr(0, 12) << "\n";
        } else {
            s = cluster::select_best_solution(m, grid, cfg.workers);
            const auto tmp = file.string() + ".tmp";
            std::ofstream(tmp) << cluster::to_json(s).dump(1) << "\n";
            fs::rename(tmp, file);
            ++st.computed;
            log << "cluster " << q.id << ": computed k=" << s.k << " (" << grid.size() << " runs) -> "
                << key.substr(0, 12) << "\n";
        }
        std::ofstream(out_dir / (q.id + ".json")) << cluster::to_json(s).dump(1) << "\n";
        st.solutions.push_back(std::move(s));
    }
    return st;
}

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline nlohmann::json stats_block(const std::vector<coverage::QuestionCoverage>& qs, coverage::Metric metric,
                                  const RunConfig& cfg, std::uint64_t seed) {
    const auto obs = coverage::observations(qs, metric);
    nlohmann::json j;
    j["metric"] = coverage::to_string(metric);
    std::map<std::string, double> raw;
    std::map<std::string, int> n;
    for (const auto& o : obs) {
        raw[o.model_id] += o.value;
        ++n[o.model_id];
    }
    for (auto& [m, v] : raw) v /= n[m];
    j["raw"] = raw;
    nlohmann::json notes = nlohmann::json::array();
    j["adjusted"] = nullptr;
    j["contrasts"] = nullptr;
    j["bootstrap"] = nullptr;
    try {
        auto fit = stats::fit_coverage_ols(obs);
        j["adjusted"] = fit.adjusted;
        j["reference_question"] = fit.reference_question();
        try {
            fit.vcov = stats::cluster_robust_vcov(fit);
            fit.contrasts = stats::grand_mean_tests(fit, *fit.vcov);
            nlohmann::json cs = nlohmann::json::array();
            for (const auto& c : fit.contrasts)
                cs.push_back({{"model_id", c.model_id}, {"estimate", c.estimate}, {"se", c.se}, {"t", c.t},
                              {"p", c.p}, {"ci_low", c.ci_low}, {"ci_high", c.ci_high}});
            j["contrasts"] = cs;
        } catch (const NumericError& e) {
            notes.push_back(std::string("robust inference unavailable: ") + e.what());
        }
        try {
            const auto b = stats::bootstrap_ci(obs, {cfg.bootstrap_reps, seed, 0.95, cfg.workers});
            nlohmann::json iv = nlohmann::json::array();
            for (const auto& i : b.intervals)
                iv.push_back({{"model_id", i.model_id}, {"estimate", i.estimate}, {"low", i.low}, {"high", i.high}});
            j["bootstrap"] = {{"seed", b.seed}, {"replicates", b.replicates}, {"failed", b.failed},
                              {"low_replicates", b.low_replicates}, {"intervals", iv}};
        } catch (const NumericError& e) {
            notes.push_back(std::string("bootstrap unavailable: ") + e.what());
        }
    } catch (const NumericError& e) {
        notes.push_back(std::string("regression unavailable: ") + e.what());
    }
    j["notes"] = notes;
    return j;
}

}  // namespace detail

/// Coverage, regression, sensitivity, correlation and cohesion results for
/// the configured question subset.
inline nlohmann::json score_section(const RunConfig& cfg, const Dataset& ds,
                                    const std::vector<cluster::ClusterSolution>& solutions) {
    const Seeds seeds(cfg.seed);
    const auto subset = subset_questions(ds, cfg.subset);
    const auto table = coverage::RatingTable::from_dataset(ds);
    const auto models = ds.models();
    const auto tau = coverage::CoverageThreshold::from(cfg.tau);
    std::vector<coverage::ClusterRatings> clusters;
    std::vector<const cluster::ClusterSolution*> used;
    for (const auto& s : solutions)
        if (subset.count(s.question_id)) {
            clusters.push_back(coverage::cluster_mean_ratings(s, table, models));
            used.push_back(&s);
        }
    const auto qs = coverage::coverage_at(clusters, tau);

    nlohmann::json j;
    j["subset"] = cfg.subset;
    j["tau"] = tau.value();
    j["models"] = models;
    nlohmann::json per_q = nlohmann::json::array();
    for (const auto& q : qs) {
        auto e = coverage::to_json(q);
        const auto* question = ds.find_question(q.question_id);
        e["topic"] = question->topic ? nlohmann::json(*question->topic) : nlohmann::json(nullptr);
        e["source"] = std::string(to_string(question->source));
        per_q.push_back(std::move(e));
    }
    j["questions"] = per_q;
    j["scores"] = coverage::to_json(coverage::overton_scores(qs));
    j["reference"] = coverage::to_json(coverage::best_across_models(qs));
    j["stats"] = {{"oc", detail::stats_block(qs, coverage::Metric::oc, cfg, seeds.bootstrap_oc)},
                  {"weighted_oc", detail::stats_block(qs, coverage::Metric::weighted, cfg, seeds.bootstrap_weighted)}};
    j["sensitivity"] = coverage::to_json(coverage::threshold_sensitivity(clusters, cfg.tau_grid, std::nullopt, cfg.tau));
    j["correlations"] = {
        {"difficulty", qs.size() >= 3 ? coverage::to_json(coverage::difficulty_correlation(qs)) : nlohmann::json(nullptr)},
        {"cluster_size", coverage::to_json(coverage::cluster_size_correlation(clusters))}};
    if (!cfg.external_scores.empty()) {
        nlohmann::json ext;
        const auto os = coverage::overton_scores(qs).os();
        for (auto kind : {stats::CorrelationKind::pearson, stats::CorrelationKind::spearman, stats::CorrelationKind::kendall}) {
            try {
                ext[stats::to_string(kind)] = coverage::to_json(stats::correlate_external_scores(os, cfg.external_scores, kind));
            } catch (const NumericError&) {
                ext[stats::to_string(kind)] = nullptr;
            }
        }
        j["external"] = ext;
    } else {
        j["external"] = nullptr;
    }
    std::vector<diagnostics::QuestionCohesion> coh;
    for (const auto* s : used) coh.push_back(diagnostics::cohesion(*s, ds));
    j["cohesion"] = diagnostics::to_json(diagnostics::summarize_cohesion(std::move(coh)));
    return j;
}

namespace detail {

/// Human OS ranking against the fully automated one (every model's ratings
/// replaced by predictions): precision of the top k for k < M.
inline nlohmann::json selection(const std::vector<cluster::ClusterSolution>& solutions, const Dataset& ds,
                                const judge::RatingMap& predicted, double tau_value) {
    const auto tau = coverage::CoverageThreshold::from(tau_value);
    coverage::RatingTable automated;
    for (const auto& [k, r] : predicted) automated.set(k.question_id, k.participant_id, k.model_id, r);
    const auto human_table = coverage::RatingTable::from_dataset(ds);
    auto os = [&](const coverage::RatingTable& t) {
        std::vector<coverage::ClusterRatings> cr;
        for (const auto& s : solutions) cr.push_back(coverage::cluster_mean_ratings(s, t, ds.models()));
        return coverage::overton_scores(coverage::coverage_at(cr, tau)).os();
    };
    const auto h = os(human_table), a = os(automated);
    const auto rh = stats::ranking(h), ra = stats::ranking(a);
    nlohmann::json prec = nlohmann::json::array();
    for (std::size_t k = 1; k < rh.size(); ++k) prec.push_back({{"k", k}, {"precision", stats::precision_at_k(ra, rh, k)}});
    std::vector<double> hv, av;
    for (const auto& [m, v] : h) {
        hv.push_back(v);
        av.push_back(a.at(m));
    }
    nlohmann::json rho = nullptr;
    if (hv.size() >= 3)
        if (auto r = stats::correlation(av, hv, stats::CorrelationKind::spearman).r) rho = *r;
    return {{"human_os", h}, {"judge_os", a}, {"human_ranking", rh}, {"judge_ranking", ra}, {"spearman", rho},
            {"precision_at_k", prec}};
}

}  // namespace detail

/// Judge predictions, baselines, evaluation, leave-one-model-out and error
/// parity. Predictions persist in <out>/judge and the stage resumes from them.
inline nlohmann::json judge_section(const RunConfig& cfg, const Dataset& ds,
                                    const std::vector<cluster::ClusterSolution>& solutions, std::ostream& log) {
    namespace fs = std::filesystem;
    const Seeds seeds(cfg.seed);
    const auto subset = subset_questions(ds, cfg.subset);
    judge::RatingMap human;
    for (const auto& [k, r] : judge::human_ratings(ds))
        if (subset.count(k.question_id)) human[k] = r;

    const auto& J = cfg.judge;
    judge::JudgeConfig jc{J.endpoint, J.model, J.temperature, J.max_in_flight, J.max_retries, J.backoff_ms, J.timeout_s};
    auto client = judge::make_judge_client(jc, human);
    const fs::path dir = fs::path(cfg.out) / "judge";
    const auto tag = sha256_hex(client->id()).substr(0, 12);
    judge::ResponseCache cache(fs::path(cfg.out) / "cache" / "judge", client->id());
    judge::PredictionStore store(dir / ("predictions-" + tag + ".jsonl"));

    judge::RunOptions opt;
    opt.variants.clear();
    for (const auto& v : J.variants) opt.variants.push_back(*judge::parse_variant(v));
    opt.runs = J.runs;
    opt.seed = seeds.prompts;
    opt.workers = J.max_in_flight;
    opt.questions = subset;
    const auto st = judge::run_judge(ds, *client, &cache, store, opt);
    log << "judge " << client->id() << ": " << st.calls << " calls, " << st.cache_hits << " cache hits, " << st.resumed
        << " resumed, " << st.parse_errors << " parse errors\n";

    std::vector<judge::MethodPredictions> methods;
    nlohmann::json variants = nlohmann::json::array();
    for (auto v : opt.variants) {
        const auto name = judge::to_string(v);
        std::size_t records = 0, errors = 0, unavailable_points = 0;
        for (const auto& r : store.records())
            if (r.variant == name && subset.count(r.key.question_id)) {
                ++records;
                errors += r.parse_error;
            }
        auto agg = store.aggregated(name);
        for (auto it = agg.begin(); it != agg.end();)
            it = subset.count(it->first.question_id) ? std::next(it) : agg.erase(it);
        unavailable_points = human.size() - agg.size();
        variants.push_back({{"variant", name}, {"records", records}, {"parse_errors", errors},
                            {"unpredicted_datapoints", unavailable_points}});
        methods.push_back({name, std::move(agg)});
    }
    auto restrict = [&](judge::RatingMap m) {
        for (auto it = m.begin(); it != m.end();) it = subset.count(it->first.question_id) ? std::next(it) : m.erase(it);
        return m;
    };
    methods.push_back({"mean-of-others", restrict(judge::mean_of_others_predictions(ds))});
    auto embed = judge::make_embedding_provider({J.embedding_endpoint, J.embedding_model, J.embedding_dimension,
                                                 J.max_retries, J.backoff_ms, J.timeout_s},
                                                fs::path(cfg.out) / "cache" / "embeddings");
    methods.push_back({"semantic-similarity", restrict(judge::semantic_similarity_predictions(ds, *embed))});

    nlohmann::json j;
    j["judge"] = client->id();
    j["template_version"] = judge::kTemplateVersion;
    j["template_hash"] = judge::template_hash();
    j["runs"] = J.runs;
    j["prompt_seed"] = seeds.prompts;
    j["embedding"] = embed->id();
    j["variants"] = variants;
    j["unavailable_prompts"] = st.unavailable;
    j["evaluation"] = judge::to_json(
        judge::evaluate_predictions(methods, human, {cfg.bootstrap_reps, seeds.judge_eval, 0.95, cfg.workers}));

    // Leave-one-model-out and parity use the first variant.
    const auto& primary = methods.front();
    j["primary_variant"] = primary.name;
    std::vector<cluster::ClusterSolution> used;
    for (const auto& s : solutions)
        if (subset.count(s.question_id)) used.push_back(s);
    try {
        const auto table = coverage::RatingTable::from_dataset(ds);
        const auto tau = coverage::CoverageThreshold::from(cfg.tau);
        j["lomo"] = {{"oc", judge::to_json(judge::lomo_analysis(used, table, primary.predictions, ds.models(), ds.models(), tau,
                                                                 coverage::Metric::oc))},
                     {"weighted_oc", judge::to_json(judge::lomo_analysis(used, table, primary.predictions, ds.models(),
                                                                          ds.models(), tau, coverage::Metric::weighted))}};
    } catch (const Error& e) {
        j["lomo"] = {{"error", e.what()}};
    }
    j["selection"] = detail::selection(used, ds, primary.predictions, cfg.tau);
    std::vector<diagnostics::ErrorDatapoint> errs;
    for (const auto& [k, h] : human)
        if (auto it = primary.predictions.find(k); it != primary.predictions.end())
            errs.push_back({k.participant_id, k.question_id, k.model_id, static_cast<double>(it->second - h)});
    const auto inputs = diagnostics::parity_inputs(errs, ds, diagnostics::default_parity_categories(), J.parity_min_group);
    j["parity"] = {{"seed", seeds.parity},
                   {"min_group_size", J.parity_min_group},
                   {"results", diagnostics::to_json(diagnostics::parity_tests(inputs, cfg.permutations, seeds.parity, cfg.workers))}};
    return j;
}

/// SHA-256 of the manifest and of every file it lists, by content.
inline nlohmann::json input_hashes(const std::string& manifest) {
    namespace fs = std::filesystem;
    nlohmann::json j;
    j["manifest"] = sha256_file(manifest);
    std::ifstream in(manifest);
    const auto m = nlohmann::json::parse(in);
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [name, rel] : m.at("files").items()) {
        const auto p = fs::path(manifest).parent_path() / rel.get<std::string>();
        if (fs::exists(p)) files[name] = sha256_file(p.string());
    }
    j["files"] = files;
    return j;
}

struct Bundle {
    nlohmann::json json;
    std::string markdown;
};

std::string render_markdown(const nlohmann::json& bundle);

/// Runs every stage and assembles the RunReport. The judge section is
/// present only when a judge endpoint is configured.
inline Bundle build_report(const RunConfig& cfg, std::ostream& log) {
    validate_config(cfg);
    const auto ds = load_dataset(cfg.manifest);
    const auto clusters = run_cluster_stage(cfg, ds, log);
    nlohmann::json j;
    j["tool"] = "overton";
    j["version"] = OVERTON_VERSION;
    j["format"] = kReportFormat;
    j["dataset_version"] = ds.version();
    j["inputs"] = input_hashes(cfg.manifest);
    j["config"] = to_json(cfg);
    j["seeds"] = to_json(Seeds(cfg.seed));
    nlohmann::json sols = nlohmann::json::array();
    for (const auto& s : clusters.solutions) sols.push_back(cluster::to_json(s));
    j["clusters"] = sols;
    j["score"] = score_section(cfg, ds, clusters.solutions);
    j["judge"] = cfg.judge.endpoint.empty() ? nlohmann::json(nullptr) : judge_section(cfg, ds, clusters.solutions, log);
    return {j, render_markdown(j)};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    const auto tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw Error("cannot write " + p.string());
    }
    std::filesystem::rename(tmp, p);
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Markdown view. Everything here reads the JSON bundle only.

namespace md {

inline std::string num(const nlohmann::json& v, int digits = 3) {
    if (v.is_null()) return "n/a";
    if (v.is_string()) return v.get<std::string>();
    return fmt::fixed(v.get<double>(), digits);
}

inline std::string scores(const nlohmann::json& s) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [m, v] : s.at("scores").at("models").items()) rows.push_back({m, num(v.at("os")), num(v.at("weighted_os"))});
    rows.push_back({"best across models", num(s.at("reference").at("oc")), num(s.at("reference").at("weighted"))});
    return fmt::table({"Model", "OS", "Weighted OS"}, rows);
}

inline std::string regression(const nlohmann::json& b) {
    std::map<std::string, nlohmann::json> contrast, interval;
    if (!b.at("contrasts").is_null())
        for (const auto& c : b.at("contrasts")) contrast[c.at("model_id")] = c;
    if (!b.at("bootstrap").is_null())
        for (const auto& i : b.at("bootstrap").at("intervals")) interval[i.at("model_id")] = i;
    std::vector<std::vector<std::string>> rows;
    for (const auto& [m, raw] : b.at("raw").items()) {
        std::vector<std::string> row{m, num(raw)};
        row.push_back(b.at("adjusted").is_null() ? "n/a" : num(b.at("adjusted").at(m)));
        row.push_back(interval.count(m) ? "[" + num(interval[m].at("low")) + ", " + num(interval[m].at("high")) + "]" : "n/a");
        row.push_back(contrast.count(m) ? fmt::pvalue(contrast[m].at("p").get<double>()) : "n/a");
        rows.push_back(std::move(row));
    }
    std::string out = fmt::table({"Model", "Raw score", "Adjusted score", "95% CI", "p"}, rows);
    if (!b.at("bootstrap").is_null())
        out += "\nBootstrap: " + std::to_string(b.at("bootstrap").at("replicates").get<std::size_t>()) +
               " replicates, seed " + std::to_string(b.at("bootstrap").at("seed").get<std::uint64_t>()) + "\n";
    for (const auto& n : b.at("notes")) out += "\nNote: " + n.get<std::string>() + "\n";
    return out;
}

inline std::string questions(const nlohmann::json& s) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& q : s.at("questions"))
        for (const auto& [m, c] : q.at("models").items())
            rows.push_back({q.at("topic").is_null() ? "" : q.at("topic").get<std::string>(), q.at("question_id"),
                            std::to_string(q.at("k").get<int>()), m, num(c.at("oc")), num(c.at("weighted_oc"))});
    return fmt::table({"Topic", "QID", "#Clusters", "Model", "OC", "Weighted OC"}, rows);
}

inline std::string sensitivity(const nlohmann::json& s) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : s.at("rows"))
        rows.push_back({num(r.at("tau"), 1), num(r.at("kendall_os")), num(r.at("kendall_weighted"))});
    rows.push_back({"median (alternatives)", num(s.at("median_kendall_os")), num(s.at("median_kendall_weighted"))});
    std::string out = fmt::table({"tau", "Kendall tau (OS)", "Kendall tau (weighted OS)"}, rows);
    const auto& w = s.at("win_os");
    const auto models = w.at("models").get<std::vector<std::string>>();
    std::vector<std::string> header{"OS win rate"};
    header.insert(header.end(), models.begin(), models.end());
    rows.clear();
    for (std::size_t a = 0; a < models.size(); ++a) {
        std::vector<std::string> row{models[a]};
        for (std::size_t b = 0; b < models.size(); ++b) row.push_back(a == b ? "-" : num(w.at("win")[a][b], 2));
        rows.push_back(std::move(row));
    }
    return out + "\n" + fmt::table(header, rows);
}

inline std::string correlations(const nlohmann::json& s) {
    std::vector<std::vector<std::string>> rows;
    auto add = [&](const std::string& name, const nlohmann::json& c) {
        if (c.is_null()) {
            rows.push_back({name, "n/a", "n/a", "n/a"});
            return;
        }
        const auto& pooled = c.at("pooled");
        rows.push_back({name, pooled.is_null() ? "n/a" : num(pooled.at("r")), pooled.is_null() ? "n/a" : num(pooled.at("p")),
                        num(c.at("mean_across_models"))});
    };
    add("#clusters vs OC", s.at("correlations").at("difficulty"));
    add("cluster size vs mean rating", s.at("correlations").at("cluster_size"));
    std::string out = fmt::table({"Correlation", "Pooled r", "p", "Mean across models"}, rows);
    if (!s.at("external").is_null()) {
        rows.clear();
        for (const auto& [k, c] : s.at("external").items())
            rows.push_back({k, c.is_null() ? "n/a" : num(c.at("r")), c.is_null() ? "n/a" : num(c.at("p"))});
        out += "\n" + fmt::table({"OS vs external score", "r", "p"}, rows);
    }
    return out;
}

inline std::string cohesion(const nlohmann::json& c) {
    auto cell = [&](const char* side, const char* field) {
        return c.at(side).is_null() ? std::string("n/a") : num(c.at(side).at(field));
    };
    std::vector<std::vector<std::string>> rows{{"Approve", cell("within", "approve"), cell("out", "approve")},
                                               {"Disapprove", cell("within", "disapprove"), cell("out", "disapprove")},
                                               {"Pass", cell("within", "pass"), cell("out", "pass")}};
    return fmt::table({"Vote", "Within cluster", "Out of cluster"}, rows) + "\nMean cohesion: " +
           num(c.at("mean_cohesion")) + " over " + std::to_string(c.at("clusters_in_mean").get<std::size_t>()) +
           " non-singleton clusters\n";
}

inline std::string judge(const nlohmann::json& j) {
    std::string out = "Judge: `" + j.at("judge").get<std::string>() + "`, template " +
                      j.at("template_version").get<std::string>() + " (" +
                      j.at("template_hash").get<std::string>().substr(0, 12) + "), " +
                      std::to_string(j.at("runs").get<int>()) + " runs per prompt\n\n";
    const auto& ev = j.at("evaluation");
    std::vector<std::vector<std::string>> rows;
    auto ci = [&](const nlohmann::json& m) {
        return num(m.at("value")) + " [" + num(m.at("low")) + ", " + num(m.at("high")) + "]";
    };
    for (const auto& m : ev.at("methods"))
        rows.push_back({m.at("name"), ci(m.at("accuracy")), ci(m.at("mae")), ci(m.at("mse")), num(m.at("spearman"))});
    out += fmt::table({"Method", "Accuracy", "MAE", "MSE", "Spearman"}, rows);
    out += "\nDatapoints: " + std::to_string(ev.at("datapoints").get<std::size_t>()) + "\n\n";
    rows.clear();
    for (const auto& w : ev.at("win_tie"))
        rows.push_back({w.at("a"), w.at("b"), num(w.at("win")), num(w.at("tie")), num(w.at("loss"))});
    out += fmt::table({"A", "B", "A wins", "Tie", "B wins"}, rows);

    out += "\n### Leave-one-model-out (" + j.at("primary_variant").get<std::string>() + ")\n\n";
    if (j.at("lomo").contains("error")) {
        out += "Unavailable: " + j.at("lomo").at("error").get<std::string>() + "\n";
    } else {
        for (const char* metric : {"oc", "weighted_oc"}) {
            const auto& l = j.at("lomo").at(metric);
            rows.clear();
            for (const auto& r : l.at("rows"))
                rows.push_back({r.at("target"), num(r.at("spearman")), num(r.at("pearson")), num(r.at("coef_mae")),
                                num(r.at("sign_agreement"), 2)});
            rows.push_back({"mean", num(l.at("mean_spearman")), num(l.at("mean_pearson")), num(l.at("mean_coef_mae")),
                            num(l.at("mean_sign_agreement"), 2)});
            out += std::string("Metric: ") + metric + "\n\n" +
                   fmt::table({"Substituted model", "Spearman", "Pearson (coef)", "Coef MAE", "Sign agreement"}, rows) + "\n";
            rows.clear();
            for (const auto& r : l.at("rows"))
                for (const auto& d : r.at("deltas"))
                    if (d.at("model_id") == r.at("target"))
                        rows.push_back({d.at("model_id"), num(d.at("human")), num(d.at("substituted")), num(d.at("delta"))});
            out += fmt::table({"Model", "Human adj. score", "Predicted adj. score", "Delta"}, rows) + "\n";
        }
    }
    const auto& sel = j.at("selection");
    out += "### Model selection with judge ratings\n\n";
    rows.clear();
    const auto hr = sel.at("human_ranking").get<std::vector<std::string>>();
    const auto jr = sel.at("judge_ranking").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < hr.size(); ++i)
        rows.push_back({std::to_string(i + 1), hr[i], num(sel.at("human_os").at(hr[i])), jr[i], num(sel.at("judge_os").at(jr[i]))});
    out += fmt::table({"Rank", "Human", "OS", "Judge", "OS"}, rows);
    out += "\nSpearman: " + num(sel.at("spearman"));
    for (const auto& p : sel.at("precision_at_k"))
        out += ", P@" + std::to_string(p.at("k").get<std::size_t>()) + " = " + num(p.at("precision"), 2);
    out += "\n\n### Error parity\n\n";
    rows.clear();
    for (const auto& r : j.at("parity").at("results"))
        for (const char* m : {"mae", "mse"}) {
            const auto& x = r.at(m);
            rows.push_back({x.at("category"), x.at("metric"), num(x.at("F")), fmt::pvalue(x.at("p_perm").get<double>()),
                            num(x.at("eta_squared"))});
        }
    return out + fmt::table({"Category", "Metric", "F", "p (perm)", "eta^2"}, rows);
}

inline std::string score(const nlohmann::json& s) {
    std::string out;
    out += "## Overton scores (tau = " + num(s.at("tau"), 1) + ", subset " + s.at("subset").get<std::string>() + ")\n\n";
    out += scores(s);
    out += "\n## Adjusted scores, OC\n\n" + regression(s.at("stats").at("oc"));
    out += "\n## Adjusted scores, weighted OC\n\n" + regression(s.at("stats").at("weighted_oc"));
    out += "\n## Per-question coverage\n\n" + questions(s);
    out += "\n## Threshold sensitivity\n\n" + sensitivity(s.at("sensitivity"));
    out += "\n## Correlations\n\n" + correlations(s);
    out += "\n## Viewpoint cohesion\n\n" + cohesion(s.at("cohesion"));
    return out;
}

}  // namespace md

inline std::string render_markdown(const nlohmann::json& bundle) {
    std::string out = "# Overton benchmark report\n\n";
    out += "Tool " + bundle.at("tool").get<std::string>() + " " + bundle.at("version").get<std::string>() +
           ", dataset " + bundle.at("dataset_version").get<std::string>() + ", manifest sha256 " +
           bundle.at("inputs").at("manifest").get<std::string>().substr(0, 12) + "\n\n";
    out += md::score(bundle.at("score"));
    if (!bundle.at("judge").is_null()) out += "\n## Judge evaluation\n\n" + md::judge(bundle.at("judge"));
    return out;
}

}  // namespace overton::pipeline
