// overton: command-line front end for the coverage benchmark.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "overton/pipeline.hpp"

namespace fs = std::filesystem;
using namespace overton;

namespace {

struct Flags {
    std::string config;
    std::optional<std::string> manifest, subset, out, judge_endpoint, judge_model, tau_grid;
    std::optional<double> tau;
    std::optional<std::size_t> bootstrap_reps, permutations;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs, grid_seeds;
    std::optional<std::string> k_max, distance, outlier, min_size;
    unsigned workers = 1;
};

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* flag) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        T v;
        if (!(is >> v) || !is.eof()) throw Error(std::string("--") + flag + ": cannot parse '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw Error(std::string("--") + flag + ": empty list");
    return out;
}

pipeline::RunConfig resolve(const Flags& f) {
    pipeline::RunConfig c;
    if (!f.config.empty()) c = pipeline::load_config(f.config);
    if (f.manifest) c.manifest = *f.manifest;
    if (f.subset) c.subset = *f.subset;
    if (f.out) c.out = *f.out;
    if (f.tau) c.tau = *f.tau;
    if (f.tau_grid) c.tau_grid = parse_list<double>(*f.tau_grid, "tau-grid");
    if (f.bootstrap_reps) c.bootstrap_reps = *f.bootstrap_reps;
    if (f.permutations) c.permutations = *f.permutations;
    if (f.seed) c.seed = *f.seed;
    if (f.judge_endpoint) c.judge.endpoint = *f.judge_endpoint;
    if (f.judge_model) c.judge.model = *f.judge_model;
    if (f.runs) c.judge.runs = *f.runs;
    if (f.grid_seeds) c.grid.seeds = *f.grid_seeds;
    if (f.k_max) c.grid.k_max = parse_list<int>(*f.k_max, "k-max");
    if (f.distance) c.grid.distance_threshold = parse_list<double>(*f.distance, "distance-thresholds");
    if (f.outlier) c.grid.outlier_threshold = parse_list<double>(*f.outlier, "outlier-thresholds");
    if (f.min_size) c.grid.min_cluster_size = parse_list<int>(*f.min_size, "min-cluster-sizes");
    c.workers = std::max(1u, f.workers);
    pipeline::validate_config(c);
    return c;
}

void common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON run config; flags override it");
    app->add_option("--manifest", f.manifest, "dataset manifest.json");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--seed", f.seed, "master seed");
    app->add_option("--workers", f.workers, "worker threads (results do not depend on it)");
    app->add_option("--grid-seeds", f.grid_seeds, "k-means restarts per grid point");
    app->add_option("--k-max", f.k_max, "comma-separated k_max values");
    app->add_option("--distance-thresholds", f.distance, "comma-separated merge distances");
    app->add_option("--outlier-thresholds", f.outlier, "comma-separated outlier thresholds");
    app->add_option("--min-cluster-sizes", f.min_size, "comma-separated minimum cluster sizes");
}

void scoring(CLI::App* app, Flags& f) {
    app->add_option("--subset", f.subset, "all | model_slant | prism");
    app->add_option("--tau", f.tau, "coverage threshold");
    app->add_option("--tau-grid", f.tau_grid, "comma-separated thresholds for the sensitivity table");
    app->add_option("--bootstrap-reps", f.bootstrap_reps, "bootstrap replicates");
    app->add_option("--permutations", f.permutations, "permutations for parity tests");
}

void judging(CLI::App* app, Flags& f) {
    app->add_option("--judge-endpoint", f.judge_endpoint, "stub:echo, stub:constant:N or a chat-completions URL");
    app->add_option("--judge-model", f.judge_model, "model name sent to the endpoint");
    app->add_option("--runs", f.runs, "judge runs per prompt");
}

int cmd_validate(const Flags& f) {
    if (!f.manifest) throw Error("--manifest is required");
    const auto ds = load_dataset(*f.manifest);
    const auto report = validate_dataset(ds);
    for (const auto& e : report.entries)
        std::cerr << (e.severity == Severity::error ? "error" : "warning") << ": " << e.code << ": " << e.message << "\n";
    std::cout << to_json(report).dump(2) << "\n";
    return report.ok() ? 0 : 1;
}

int cmd_cluster(const Flags& f) {
    const auto cfg = resolve(f);
    const auto ds = load_dataset(cfg.manifest);
    const auto st = pipeline::run_cluster_stage(cfg, ds, std::cerr);
    std::cerr << "clusters: " << st.solutions.size() << " questions, " << st.cache_hits << " cache hits, " << st.computed
              << " computed\n";
    return 0;
}

int cmd_score(const Flags& f) {
    const auto cfg = resolve(f);
    const auto ds = load_dataset(cfg.manifest);
    const auto st = pipeline::run_cluster_stage(cfg, ds, std::cerr);
    const auto score = pipeline::score_section(cfg, ds, st.solutions);
    pipeline::write_file(fs::path(cfg.out) / "score.json", pipeline::dump(score));
    pipeline::write_file(fs::path(cfg.out) / "score.md", pipeline::md::score(score));
    std::cerr << "wrote " << (fs::path(cfg.out) / "score.json").string() << "\n";
    return 0;
}

int cmd_judge(const Flags& f) {
    auto cfg = resolve(f);
    if (cfg.judge.endpoint.empty()) throw Error("--judge-endpoint (or judge.endpoint in the config) is required");
    const auto ds = load_dataset(cfg.manifest);
    const auto st = pipeline::run_cluster_stage(cfg, ds, std::cerr);
    const auto j = pipeline::judge_section(cfg, ds, st.solutions, std::cerr);
    pipeline::write_file(fs::path(cfg.out) / "judge.json", pipeline::dump(j));
    pipeline::write_file(fs::path(cfg.out) / "judge.md", pipeline::md::judge(j));
    std::cerr << "wrote " << (fs::path(cfg.out) / "judge.json").string() << "\n";
    return 0;
}

int cmd_report(const Flags& f) {
    const auto cfg = resolve(f);
    const auto b = pipeline::build_report(cfg, std::cerr);
    pipeline::write_file(fs::path(cfg.out) / "report.json", pipeline::dump(b.json));
    pipeline::write_file(fs::path(cfg.out) / "report.md", b.markdown);
    std::cerr << "wrote " << (fs::path(cfg.out) / "report.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Overton coverage benchmark"};
    app.set_version_flag("--version", std::string(OVERTON_VERSION));
    app.require_subcommand(1);
    Flags f;

    auto* validate = app.add_subcommand("validate", "check a dataset for integrity errors and warnings");
    validate->add_option("--manifest", f.manifest, "dataset manifest.json")->required();

    auto* cluster = app.add_subcommand("cluster", "cluster each question's voters (cached)");
    common(cluster, f);

    auto* score = app.add_subcommand("score", "coverage, adjusted scores and sensitivity");
    common(score, f);
    scoring(score, f);

    auto* judge = app.add_subcommand("judge", "predict ratings with a judge and evaluate them (resumable)");
    common(judge, f);
    scoring(judge, f);
    judging(judge, f);

    auto* report = app.add_subcommand("report", "run every stage and write report.json and report.md");
    common(report, f);
    scoring(report, f);
    judging(report, f);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*validate) return cmd_validate(f);
        if (*cluster) return cmd_cluster(f);
        if (*score) return cmd_score(f);
        if (*judge) return cmd_judge(f);
        if (*report) return cmd_report(f);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
