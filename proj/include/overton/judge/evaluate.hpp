#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overton/cluster.hpp"
#include "overton/coverage.hpp"
#include "overton/dataset.hpp"
#include "overton/format.hpp"
#include "overton/judge/embedding.hpp"
#include "overton/judge/prompt.hpp"
#include "overton/stats/correlation.hpp"
#include "overton/stats/ols.hpp"
#include "overton/stats/rates.hpp"
#include "overton/stats/resampling.hpp"

namespace overton::judge {

using RatingMap = std::map<DatapointKey, int>;

inline RatingMap human_ratings(const Dataset& ds) {
    RatingMap out;
    for (const auto& r : ds.ratings()) out[{r.participant_id, r.question_id, r.model_id}] = r.rating;
    return out;
}

/// Rounds sum/count half away from zero (ratings are positive, so upward)
/// and clamps to the rating scale. Integer arithmetic keeps .5 exact.
inline int rounded_mean_rating(long sum, long count) {
    if (count <= 0) throw NumericError("rounded mean of no ratings");
    const long r = (2 * sum + count) / (2 * count);
    return static_cast<int>(std::clamp(r, 1L, 5L));
}

/// Mean of the parsed runs, rounded. Empty when no run parsed.
inline std::optional<int> aggregate_runs(std::span<const std::optional<int>> runs) {
    long sum = 0, n = 0;
    for (const auto& r : runs)
        if (r) {
            sum += *r;
            ++n;
        }
    if (!n) return std::nullopt;
    return rounded_mean_rating(sum, n);
}

inline std::optional<int> baseline_mean_of_others(std::span<const int> others) {
    if (others.empty()) return std::nullopt;
    long sum = 0;
    for (int r : others) sum += r;
    return rounded_mean_rating(sum, static_cast<long>(others.size()));
}

/// Mean-of-others prediction for every rating that has at least one sibling
/// rating (same participant and question, other model).
inline RatingMap mean_of_others_predictions(const Dataset& ds) {
    RatingMap out;
    for (const auto& q : ds.questions()) {
        std::map<std::string, std::vector<const RatingRecord*>> by_participant;
        for (const auto* r : ds.ratings_for(q.id)) by_participant[r->participant_id].push_back(r);
        for (const auto& [pid, rs] : by_participant)
            for (const auto* target : rs) {
                std::vector<int> others;
                for (const auto* o : rs)
                    if (o != target) others.push_back(o->rating);
                if (auto p = baseline_mean_of_others(others)) out[{pid, q.id, target->model_id}] = *p;
            }
    }
    return out;
}

inline RatingMap semantic_similarity_predictions(const Dataset& ds, EmbeddingProvider& provider) {
    RatingMap out;
    for (const auto& q : ds.questions()) {
        std::map<std::string, std::vector<const RatingRecord*>> by_participant;
        for (const auto* r : ds.ratings_for(q.id)) by_participant[r->participant_id].push_back(r);
        for (const auto& [pid, rs] : by_participant)
            for (const auto* target : rs) {
                std::vector<RatedResponse> others;
                for (const auto* o : rs)
                    if (o != target) others.push_back({o->model_id, ds.find_response(q.id, o->model_id)->text, o->rating});
                const auto choice =
                    baseline_semantic_similarity(ds.find_response(q.id, target->model_id)->text, others, provider);
                if (choice) out[{pid, q.id, target->model_id}] = choice->rating;
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prediction store

struct PredictionRecord {
    DatapointKey key;
    std::string variant;
    std::string judge;   // client id
    int run_index = 0;
    std::optional<int> rating;
    std::string raw;
    bool parse_error = false;
    std::string cache_key;
    std::string template_hash;
    std::vector<std::string> example_order;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const PredictionRecord& r) {
    return {{"participant_id", r.key.participant_id},
            {"question_id", r.key.question_id},
            {"model_id", r.key.model_id},
            {"variant", r.variant},
            {"judge", r.judge},
            {"run", r.run_index},
            {"rating", r.rating ? nlohmann::json(*r.rating) : nlohmann::json(nullptr)},
            {"raw", r.raw},
            {"parse_error", r.parse_error},
            {"cache_key", r.cache_key},
            {"template_hash", r.template_hash},
            {"example_order", r.example_order},
            {"seed", r.seed}};
}

inline PredictionRecord record_from_json(const nlohmann::json& j) {
    PredictionRecord r;
    r.key = {j.at("participant_id"), j.at("question_id"), j.at("model_id")};
    r.variant = j.at("variant");
    r.judge = j.at("judge");
    r.run_index = j.at("run");
    if (!j.at("rating").is_null()) r.rating = j.at("rating").get<int>();
    r.raw = j.at("raw");
    r.parse_error = j.at("parse_error");
    r.cache_key = j.at("cache_key");
    r.template_hash = j.at("template_hash");
    r.example_order = j.at("example_order").get<std::vector<std::string>>();
    r.seed = j.at("seed");
    return r;
}

/// Append-only JSONL of judge predictions. Reopening a store resumes it: a
/// torn final line from an interrupted run is dropped.
class PredictionStore {
public:
    explicit PredictionStore(std::filesystem::path path) : path_(std::move(path)) {
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        std::string text;
        {
            std::ifstream in(path_, std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        }
        const auto end = text.rfind('\n');
        const std::size_t keep = end == std::string::npos ? 0 : end + 1;
        if (keep != text.size()) std::filesystem::resize_file(path_, keep);
        std::istringstream lines(text.substr(0, keep));
        std::string line;
        while (std::getline(lines, line))
            if (!line.empty()) add(record_from_json(nlohmann::json::parse(line)));
    }

    bool has(const DatapointKey& key, const std::string& variant, int run) const {
        return index_.count({key, variant, run}) > 0;
    }

    void append(const PredictionRecord& r) {
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        out << to_json(r).dump() << '\n';
        out.flush();
        if (!out) throw Error("prediction store: cannot append to " + path_.string());
        add(r);
    }

    const std::vector<PredictionRecord>& records() const { return records_; }
    const std::filesystem::path& path() const { return path_; }

    /// Aggregated rating per datapoint for one variant.
    RatingMap aggregated(const std::string& variant) const {
        std::map<DatapointKey, std::vector<std::optional<int>>> runs;
        for (const auto& r : records_)
            if (r.variant == variant) runs[r.key].push_back(r.rating);
        RatingMap out;
        for (const auto& [k, v] : runs)
            if (auto a = aggregate_runs(v)) out[k] = *a;
        return out;
    }

    std::size_t parse_errors(const std::string& variant) const {
        std::size_t n = 0;
        for (const auto& r : records_) n += r.variant == variant && r.parse_error;
        return n;
    }

private:
    void add(PredictionRecord r) {
        index_.insert({r.key, r.variant, r.run_index});
        records_.push_back(std::move(r));
    }

    std::filesystem::path path_;
    std::vector<PredictionRecord> records_;
    std::set<std::tuple<DatapointKey, std::string, int>> index_;
};

// ---------------------------------------------------------------------------
// Datapoint-level evaluation

struct MethodPredictions {
    std::string name;
    RatingMap predictions;
};

struct MetricCI {
    double value = 0;
    double low = 0;
    double high = 0;
};

struct MethodMetrics {
    std::string name;
    std::size_t predicted = 0;  // before intersecting
    MetricCI accuracy;
    MetricCI mae;
    MetricCI mse;
    std::optional<double> spearman;
};

struct EvaluationReport {
    std::size_t datapoints = 0;  // shared by every method and the human ratings
    std::vector<MethodMetrics> methods;
    std::vector<std::vector<stats::WinTieRate>> win;  // [a][b]: a's error strictly lower
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
};

/// Accuracy, MAE, MSE and Spearman against human ratings on the datapoints
/// every method predicted, with bootstrap CIs over datapoints.
inline EvaluationReport evaluate_predictions(const std::vector<MethodPredictions>& methods, const RatingMap& human,
                                             const stats::BootstrapOptions& opt) {
    if (methods.empty()) throw Error("evaluation: no methods");
    std::vector<DatapointKey> keys;
    for (const auto& [k, h] : human) {
        bool all = true;
        for (const auto& m : methods) all = all && m.predictions.count(k);
        if (all) keys.push_back(k);
    }
    if (keys.empty()) throw Error("evaluation: methods share no datapoints with the human ratings");
    EvaluationReport rep;
    rep.datapoints = keys.size();
    rep.replicates = opt.replicates;
    rep.seed = opt.seed;
    std::vector<double> truth;
    for (const auto& k : keys) truth.push_back(human.at(k));
    std::vector<std::vector<double>> errors;
    for (const auto& m : methods) {
        std::vector<double> pred, err;
        for (const auto& k : keys) {
            pred.push_back(m.predictions.at(k));
            err.push_back(pred.back() - human.at(k));
        }
        auto mean_of = [&](auto f) {
            return [&err, f](std::span<const std::size_t> idx) {
                double s = 0;
                for (auto i : idx) s += f(err[i]);
                return s / static_cast<double>(idx.size());
            };
        };
        std::vector<std::size_t> all(keys.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        auto metric = [&](auto f) {
            const auto stat = mean_of(f);
            const auto ci = stats::bootstrap_statistic(keys.size(), opt, stat);
            return MetricCI{stat(all), ci.low, ci.high};
        };
        MethodMetrics mm;
        mm.name = m.name;
        mm.predicted = m.predictions.size();
        mm.accuracy = metric([](double e) { return e == 0 ? 1.0 : 0.0; });
        mm.mae = metric([](double e) { return std::abs(e); });
        mm.mse = metric([](double e) { return e * e; });
        if (keys.size() >= 3) mm.spearman = stats::correlation(pred, truth, stats::CorrelationKind::spearman).r;
        rep.methods.push_back(std::move(mm));
        errors.push_back(std::move(err));
    }
    rep.win.assign(methods.size(), std::vector<stats::WinTieRate>(methods.size()));
    for (std::size_t a = 0; a < methods.size(); ++a)
        for (std::size_t b = 0; b < methods.size(); ++b)
            if (a != b) rep.win[a][b] = stats::win_tie_rates(errors[a], errors[b]);
    return rep;
}

inline nlohmann::json to_json(const MetricCI& m) { return {{"value", m.value}, {"low", m.low}, {"high", m.high}}; }

inline nlohmann::json to_json(const EvaluationReport& r) {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : r.methods)
        ms.push_back({{"name", m.name},
                      {"predicted", m.predicted},
                      {"accuracy", to_json(m.accuracy)},
                      {"mae", to_json(m.mae)},
                      {"mse", to_json(m.mse)},
                      {"spearman", m.spearman ? nlohmann::json(*m.spearman) : nlohmann::json(nullptr)}});
    nlohmann::json win = nlohmann::json::array();
    for (std::size_t a = 0; a < r.win.size(); ++a)
        for (std::size_t b = 0; b < r.win.size(); ++b)
            if (a != b)
                win.push_back({{"a", r.methods[a].name},
                               {"b", r.methods[b].name},
                               {"win", r.win[a][b].win},
                               {"tie", r.win[a][b].tie},
                               {"loss", r.win[a][b].loss}});
    return {{"datapoints", r.datapoints}, {"replicates", r.replicates}, {"seed", r.seed}, {"methods", ms}, {"win_tie", win}};
}

inline std::string evaluation_markdown(const EvaluationReport& r) {
    auto ci = [](const MetricCI& m) { return fmt::fixed(m.value) + " [" + fmt::fixed(m.low) + ", " + fmt::fixed(m.high) + "]"; };
    std::vector<std::vector<std::string>> rows;
    for (const auto& m : r.methods) rows.push_back({m.name, ci(m.accuracy), ci(m.mae), ci(m.mse), fmt::fixed(m.spearman)});
    std::string out = fmt::table({"Method", "Accuracy", "MAE", "MSE", "Spearman"}, rows);
    out += "\nDatapoints: " + std::to_string(r.datapoints) + "\n\n";
    std::vector<std::string> header{"win / tie"};
    for (const auto& m : r.methods) header.push_back(m.name);
    rows.clear();
    for (std::size_t a = 0; a < r.methods.size(); ++a) {
        std::vector<std::string> row{r.methods[a].name};
        for (std::size_t b = 0; b < r.methods.size(); ++b)
            row.push_back(a == b ? "-" : fmt::fixed(r.win[a][b].win, 2) + " / " + fmt::fixed(r.win[a][b].tie, 2));
        rows.push_back(std::move(row));
    }
    return out + fmt::table(header, rows);
}

// ---------------------------------------------------------------------------
// Leave-one-model-out substitution

struct LomoDelta {
    std::string model_id;
    double human = 0;        // adjusted score with human ratings
    double substituted = 0;  // adjusted score after substitution
    double delta = 0;        // substituted - human
};

struct LomoRow {
    std::string target;
    std::size_t substituted_ratings = 0;
    std::optional<double> spearman;  // adjusted scores, over models
    std::optional<double> pearson;   // grand-mean contrasts
    double coef_mae = 0;
    double sign_agreement = 0;
    std::vector<LomoDelta> deltas;
};

struct LomoReport {
    coverage::Metric metric = coverage::Metric::oc;
    coverage::CoverageThreshold tau;
    std::vector<LomoRow> rows;
    std::optional<double> mean_spearman;
    std::optional<double> mean_pearson;
    double mean_coef_mae = 0;
    double mean_sign_agreement = 0;
};

namespace detail {

inline std::map<std::string, double> contrasts(const stats::RegressionFit& fit) {
    double mean = 0;
    for (const auto& [m, b] : fit.beta) mean += b;
    mean /= static_cast<double>(fit.beta.size());
    std::map<std::string, double> out;
    for (const auto& [m, b] : fit.beta) out[m] = b - mean;
    return out;
}

inline stats::RegressionFit fit_table(std::span<const cluster::ClusterSolution> solutions, const coverage::RatingTable& table,
                                      const std::vector<std::string>& models, coverage::CoverageThreshold tau,
                                      coverage::Metric metric) {
    std::vector<coverage::QuestionCoverage> qs;
    for (const auto& s : solutions) qs.push_back(coverage::question_coverage(coverage::cluster_mean_ratings(s, table, models), tau));
    const auto obs = coverage::observations(qs, metric);
    return stats::fit_coverage_ols(obs);
}

inline int sign(double x) { return (x > 1e-12) - (x < -1e-12); }

}  // namespace detail

/// For each target model, swaps its human ratings for predictions while
/// keeping clusters fixed, then compares the refitted model scores with the
/// all-human fit.
inline LomoReport lomo_analysis(std::span<const cluster::ClusterSolution> solutions, const coverage::RatingTable& human,
                                const RatingMap& predicted, const std::vector<std::string>& models,
                                const std::vector<std::string>& targets, coverage::CoverageThreshold tau,
                                coverage::Metric metric = coverage::Metric::oc) {
    LomoReport rep;
    rep.metric = metric;
    rep.tau = tau;
    const auto base = detail::fit_table(solutions, human, models, tau, metric);
    const auto base_c = detail::contrasts(base);
    std::vector<double> rhos, rs;
    for (const auto& target : targets) {
        auto table = human;
        LomoRow row;
        row.target = target;
        std::vector<std::string> gaps;
        for (const auto& [q, ps] : human.data())
            for (const auto& [p, ms] : ps) {
                if (!ms.count(target)) continue;
                auto it = predicted.find({p, q, target});
                if (it == predicted.end()) {
                    gaps.push_back(p + "/" + q);
                    continue;
                }
                table.set(q, p, target, it->second);
                ++row.substituted_ratings;
            }
        if (!gaps.empty())
            throw Error("lomo: " + std::to_string(gaps.size()) + " ratings of " + target + " have no prediction (first: " +
                        gaps.front() + ")");
        const auto fit = detail::fit_table(solutions, table, models, tau, metric);
        const auto c = detail::contrasts(fit);
        std::vector<double> ha, sa, hc, sc;
        std::size_t agree = 0;
        for (const auto& m : base.models) {
            row.deltas.push_back({m, base.adjusted.at(m), fit.adjusted.at(m), fit.adjusted.at(m) - base.adjusted.at(m)});
            ha.push_back(base.adjusted.at(m));
            sa.push_back(fit.adjusted.at(m));
            hc.push_back(base_c.at(m));
            sc.push_back(c.at(m));
            row.coef_mae += std::abs(c.at(m) - base_c.at(m));
            agree += detail::sign(c.at(m)) == detail::sign(base_c.at(m));
        }
        const double n = static_cast<double>(base.models.size());
        row.coef_mae /= n;
        row.sign_agreement = static_cast<double>(agree) / n;
        if (ha.size() >= 3) {
            row.spearman = stats::correlation(ha, sa, stats::CorrelationKind::spearman).r;
            row.pearson = stats::correlation(hc, sc, stats::CorrelationKind::pearson).r;
        }
        if (row.spearman) rhos.push_back(*row.spearman);
        if (row.pearson) rs.push_back(*row.pearson);
        rep.mean_coef_mae += row.coef_mae;
        rep.mean_sign_agreement += row.sign_agreement;
        rep.rows.push_back(std::move(row));
    }
    auto mean = [](const std::vector<double>& v) -> std::optional<double> {
        if (v.empty()) return std::nullopt;
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    rep.mean_spearman = mean(rhos);
    rep.mean_pearson = mean(rs);
    if (!rep.rows.empty()) {
        rep.mean_coef_mae /= static_cast<double>(rep.rows.size());
        rep.mean_sign_agreement /= static_cast<double>(rep.rows.size());
    }
    return rep;
}

inline nlohmann::json to_json(const LomoReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json d = nlohmann::json::array();
        for (const auto& x : row.deltas)
            d.push_back({{"model_id", x.model_id}, {"human", x.human}, {"substituted", x.substituted}, {"delta", x.delta}});
        rows.push_back({{"target", row.target},
                        {"substituted_ratings", row.substituted_ratings},
                        {"spearman", opt(row.spearman)},
                        {"pearson", opt(row.pearson)},
                        {"coef_mae", row.coef_mae},
                        {"sign_agreement", row.sign_agreement},
                        {"deltas", d}});
    }
    return {{"metric", coverage::to_string(r.metric)},
            {"tau", r.tau.value()},
            {"mean_spearman", opt(r.mean_spearman)},
            {"mean_pearson", opt(r.mean_pearson)},
            {"mean_coef_mae", r.mean_coef_mae},
            {"mean_sign_agreement", r.mean_sign_agreement},
            {"rows", rows}};
}

/// Per-target agreement table, then the adjusted-score deltas of each target.
inline std::string lomo_markdown(const LomoReport& r) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : r.rows)
        rows.push_back({row.target, fmt::fixed(row.spearman), fmt::fixed(row.pearson), fmt::fixed(row.coef_mae),
                        fmt::fixed(row.sign_agreement, 2)});
    rows.push_back({"mean", fmt::fixed(r.mean_spearman), fmt::fixed(r.mean_pearson), fmt::fixed(r.mean_coef_mae),
                    fmt::fixed(r.mean_sign_agreement, 2)});
    std::string out = fmt::table({"Substituted model", "Spearman", "Pearson (coef)", "Coef MAE", "Sign agreement"}, rows);
    rows.clear();
    for (const auto& row : r.rows)
        for (const auto& d : row.deltas)
            if (d.model_id == row.target)
                rows.push_back({d.model_id, fmt::fixed(d.human), fmt::fixed(d.substituted), fmt::fixed(d.delta)});
    return out + "\n" + fmt::table({"Model", "Human adj. score", "Predicted adj. score", "Delta"}, rows);
}

}  // namespace overton::judge
