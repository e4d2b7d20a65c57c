#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "overton/error.hpp"

namespace overton::stats {

/// One coverage outcome (OC or weighted OC) for a (model, question) cell.
struct CoverageObservation {
    std::string model_id;
    std::string question_id;
    double value = 0;
};

struct ContrastTest {
    std::string model_id;
    double estimate = 0;  // beta_m minus the mean of all model coefficients
    double se = 0;
    double t = 0;
    double p = 1;
    double ci_low = 0;
    double ci_high = 0;
};

/// Fixed-effects linear probability model: value ~ 0 + model + question.
struct RegressionFit {
    std::vector<std::string> models;     // sorted; first M columns
    std::vector<std::string> questions;  // sorted; questions[0] is the reference level
    std::vector<std::string> column_names;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd coef;
    Eigen::VectorXd residuals;
    std::vector<int> cluster;            // question index per observation

    std::map<std::string, double> beta;
    std::map<std::string, double> gamma;     // reference question maps to 0
    std::map<std::string, double> adjusted;  // beta_m + mean_q gamma_q

    std::optional<Eigen::MatrixXd> vcov;  // set by attach_inference
    std::vector<ContrastTest> contrasts;

    std::size_t observations() const { return static_cast<std::size_t>(y.size()); }
    std::size_t groups() const { return questions.size(); }
    const std::string& reference_question() const { return questions.front(); }
};

inline RegressionFit fit_coverage_ols(std::span<const CoverageObservation> obs) {
    RegressionFit fit;
    std::set<std::string> model_set, question_set;
    std::set<std::pair<std::string, std::string>> cells;
    for (const auto& o : obs) {
        model_set.insert(o.model_id);
        question_set.insert(o.question_id);
        if (!cells.emplace(o.model_id, o.question_id).second)
            throw NumericError("ols: duplicate observation for model " + o.model_id +
                               ", question " + o.question_id);
    }
    if (model_set.size() < 2) throw NumericError("ols: need at least 2 models");
    if (question_set.empty()) throw NumericError("ols: no observations");
    fit.models.assign(model_set.begin(), model_set.end());
    fit.questions.assign(question_set.begin(), question_set.end());

    const auto M = static_cast<Eigen::Index>(fit.models.size());
    const auto Q = static_cast<Eigen::Index>(fit.questions.size());
    const auto N = static_cast<Eigen::Index>(obs.size());
    const Eigen::Index K = M + Q - 1;
    for (const auto& m : fit.models) fit.column_names.push_back("model[" + m + "]");
    for (Eigen::Index q = 1; q < Q; ++q)
        fit.column_names.push_back("question[" + fit.questions[static_cast<std::size_t>(q)] + "]");

    auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
        return static_cast<Eigen::Index>(std::lower_bound(v.begin(), v.end(), s) - v.begin());
    };
    fit.X = Eigen::MatrixXd::Zero(N, K);
    fit.y.resize(N);
    fit.cluster.resize(obs.size());
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        const auto m = index_of(fit.models, o.model_id);
        const auto q = index_of(fit.questions, o.question_id);
        fit.X(i, m) = 1;
        if (q > 0) fit.X(i, M + q - 1) = 1;
        fit.y(i) = o.value;
        fit.cluster[static_cast<std::size_t>(i)] = static_cast<int>(q);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(fit.X);
    qr.setThreshold(1e-10);
    if (qr.rank() < K) {
        std::string names;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index j = qr.rank(); j < K; ++j) {
            if (!names.empty()) names += ", ";
            names += fit.column_names[static_cast<std::size_t>(perm(j))];
        }
        throw NumericError("ols: rank-deficient design (rank " + std::to_string(qr.rank()) + " of " +
                           std::to_string(K) + "); collinear columns: " + names);
    }
    fit.coef = qr.solve(fit.y);
    fit.residuals = fit.y - fit.X * fit.coef;

    double gamma_sum = 0;
    fit.gamma[fit.questions.front()] = 0;
    for (Eigen::Index q = 1; q < Q; ++q) {
        fit.gamma[fit.questions[static_cast<std::size_t>(q)]] = fit.coef(M + q - 1);
        gamma_sum += fit.coef(M + q - 1);
    }
    const double gamma_mean = gamma_sum / static_cast<double>(Q);
    for (Eigen::Index m = 0; m < M; ++m) {
        const auto& id = fit.models[static_cast<std::size_t>(m)];
        fit.beta[id] = fit.coef(m);
        fit.adjusted[id] = fit.coef(m) + gamma_mean;
    }
    return fit;
}

/// CR1 sandwich covariance clustered by question.
inline Eigen::MatrixXd cluster_robust_vcov(const RegressionFit& fit) {
    const std::size_t G = fit.groups();
    if (G < 2) throw NumericError("cluster-robust covariance needs at least 2 clusters");
    const Eigen::Index K = fit.X.cols();
    const Eigen::Index N = fit.X.rows();
    if (N <= K) throw NumericError("cluster-robust covariance needs more observations than columns");
    const Eigen::MatrixXd xtx = fit.X.transpose() * fit.X;
    const Eigen::MatrixXd bread = xtx.colPivHouseholderQr().inverse();

    std::vector<Eigen::VectorXd> score(G, Eigen::VectorXd::Zero(K));
    for (Eigen::Index i = 0; i < N; ++i)
        score[static_cast<std::size_t>(fit.cluster[static_cast<std::size_t>(i)])] +=
            fit.X.row(i).transpose() * fit.residuals(i);
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(K, K);
    for (const auto& s : score) meat += s * s.transpose();

    const double g = static_cast<double>(G);
    const double n = static_cast<double>(N);
    const double k = static_cast<double>(K);
    const double factor = g / (g - 1) * (n - 1) / (n - k);
    Eigen::MatrixXd v = factor * bread * meat * bread;
    return (v + v.transpose()) / 2;
}

/// Each model's coefficient against the mean of all model coefficients, with a
/// t reference on G-1 degrees of freedom.
inline std::vector<ContrastTest> grand_mean_tests(const RegressionFit& fit, const Eigen::MatrixXd& vcov,
                                                  double level = 0.95) {
    const auto M = static_cast<Eigen::Index>(fit.models.size());
    const double df = static_cast<double>(fit.groups()) - 1;
    boost::math::students_t dist(df);
    const double crit = boost::math::quantile(dist, 0.5 + level / 2);
    std::vector<ContrastTest> out;
    for (Eigen::Index m = 0; m < M; ++m) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(fit.coef.size());
        c.head(M).setConstant(-1.0 / static_cast<double>(M));
        c(m) += 1.0;
        ContrastTest t;
        t.model_id = fit.models[static_cast<std::size_t>(m)];
        t.estimate = c.dot(fit.coef);
        const double var = c.dot(vcov * c);
        t.se = var > 0 ? std::sqrt(var) : 0.0;
        const double scale = 1e-12 * (1 + fit.y.cwiseAbs().maxCoeff());
        if (t.se <= scale) {
            // Degenerate: no sampling variation in this contrast.
            const bool zero = std::abs(t.estimate) <= scale;
            t.t = zero ? 0.0 : std::copysign(INFINITY, t.estimate);
            t.p = zero ? 1.0 : 0.0;
        } else {
            t.t = t.estimate / t.se;
            t.p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t.t)));
        }
        t.ci_low = t.estimate - crit * t.se;
        t.ci_high = t.estimate + crit * t.se;
        out.push_back(t);
    }
    return out;
}

/// Fit plus robust covariance and contrasts in one call.
inline RegressionFit fit_with_inference(std::span<const CoverageObservation> obs) {
    auto fit = fit_coverage_ols(obs);
    fit.vcov = cluster_robust_vcov(fit);
    fit.contrasts = grand_mean_tests(fit, *fit.vcov);
    return fit;
}

}  // namespace overton::stats
