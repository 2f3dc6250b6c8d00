#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>
#include <Eigen/Core>

#include "lbsimex/cohort.hpp"
#include "lbsimex/errors.hpp"
#include "lbsimex/link.hpp"
#include "lbsimex/rng.hpp"
#include "lbsimex/simex.hpp"

namespace lbsimex {

// Prevalent-cohort simulation design: covariates X* ~ N(0, cov_x),
// log T* = -X*'beta0 + eps, truncation A* ~ U(0,1) with rejection on
// T* >= A*, censoring C ~ U(0, c) drawn after acceptance, and surrogate
// W = X + eta with eta ~ N(0, sigma_eta * I).
struct SimScenario {
    LinkKind link = LinkKind::ph;
    Eigen::VectorXd beta0 = (Eigen::VectorXd(2) << 1.0, 1.0).finished();
    Eigen::MatrixXd cov_x = (Eigen::MatrixXd(2, 2) << 4.0, 0.7, 0.7, 3.0).finished();
    double target_censoring = 0.25;
    double sigma_eta = 0.5;       // diagonal value of Sigma_eta
    bool sigma_eta_is_sd = true;  // interpret sigma_eta as SD (variance otherwise)
    int n = 200;

    Eigen::Index dim() const { return beta0.size(); }

    double eta_variance() const {
        return sigma_eta_is_sd ? sigma_eta * sigma_eta : sigma_eta;
    }

    Eigen::MatrixXd error_cov() const {
        return eta_variance() * Eigen::MatrixXd::Identity(dim(), dim());
    }

    void validate() const {
        if (link == LinkKind::custom)
            throw std::invalid_argument("scenario: data generation needs ph or po");
        if (n < 1) throw std::invalid_argument("scenario: n must be positive");
        if (target_censoring <= 0.0 || target_censoring >= 1.0)
            throw std::invalid_argument("scenario: censoring rate must be in (0,1)");
        if (sigma_eta < 0.0)
            throw std::invalid_argument("scenario: sigma_eta must be non-negative");
        if (cov_x.rows() != dim() || cov_x.cols() != dim())
            throw std::invalid_argument("scenario: covariance shape mismatch");
    }
};

namespace detail {

// Extreme-value error with cumulative hazard exp(x): P(eps > x) = exp(-e^x).
inline double draw_extreme_value(Rng& rng) { return std::log(-std::log(rng.uniform_open())); }

inline double draw_logistic(Rng& rng) {
    const double u = rng.uniform_open();
    return std::log(u / (1.0 - u));
}

struct RawSubject {
    double trunc, fail;
    Eigen::VectorXd x;
};

// One accepted (A, T, X) triple; rejection realises the T* >= A* law.
inline RawSubject draw_accepted(const SimScenario& scenario, const Eigen::MatrixXd& chol_x,
                                Rng& rng, std::uint64_t& rejections) {
    const Eigen::Index p = scenario.dim();
    while (true) {
        Eigen::VectorXd z(p);
        for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
        const Eigen::VectorXd x = chol_x * z;
        const double eps = scenario.link == LinkKind::ph ? draw_extreme_value(rng)
                                                         : draw_logistic(rng);
        const double t = std::exp(-x.dot(scenario.beta0) + eps);
        const double a = rng.uniform();
        if (t >= a) return {a, t, x};
        if (++rejections > 10'000'000ULL)
            throw NumericError("data generation: acceptance probability below budget");
    }
}

}  // namespace detail

// W = X + eta rowwise, eta ~ N(0, error_cov) independent of X.
inline Eigen::MatrixXd add_measurement_error(const Eigen::MatrixXd& X,
                                             const Eigen::MatrixXd& error_cov, Rng& rng) {
    const Eigen::MatrixXd L = psd_cholesky(error_cov);
    if (L.isZero(0.0)) return X;
    Eigen::MatrixXd W(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::VectorXd z(X.cols());
        for (Eigen::Index j = 0; j < X.cols(); ++j) z[j] = rng.normal();
        W.row(i) = X.row(i) + (L * z).transpose();
    }
    return W;
}

// Draws a full cohort of size scenario.n with true covariates retained.
inline Cohort draw_prevalent_cohort(const SimScenario& scenario, double censor_upper,
                                    Rng& rng) {
    scenario.validate();
    if (censor_upper <= 0.0)
        throw std::invalid_argument("data generation: censoring bound must be positive");
    const Eigen::Index p = scenario.dim();
    const Eigen::MatrixXd chol_x = psd_cholesky(scenario.cov_x);
    const Eigen::MatrixXd chol_eta = psd_cholesky(scenario.error_cov());

    Eigen::VectorXd trunc(scenario.n), obs(scenario.n);
    std::vector<int> status(static_cast<std::size_t>(scenario.n));
    Eigen::MatrixXd truth(scenario.n, p), surrogate(scenario.n, p);

    std::uint64_t rejections = 0;
    for (int i = 0; i < scenario.n; ++i) {
        const auto s = detail::draw_accepted(scenario, chol_x, rng, rejections);
        const double c = rng.uniform(0.0, censor_upper);
        const double y = std::min(s.fail, s.trunc + c);
        trunc[i] = s.trunc;
        obs[i] = y;
        status[static_cast<std::size_t>(i)] = s.fail <= s.trunc + c ? 1 : 0;
        truth.row(i) = s.x.transpose();
        Eigen::VectorXd noise = Eigen::VectorXd::Zero(p);
        if (!chol_eta.isZero(0.0)) {
            Eigen::VectorXd z(p);
            for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
            noise = chol_eta * z;
        }
        surrogate.row(i) = (s.x + noise).transpose();
    }
    return Cohort::from_columns(std::move(trunc), std::move(obs), std::move(status),
                                std::move(surrogate), std::move(truth));
}

// Bisection on the censoring bound c against the empirical censoring
// proportion, using one frozen pilot of accepted subjects and common
// censoring uniforms so the proportion is monotone in c.
inline double calibrate_censoring(const SimScenario& scenario, double target_rate,
                                  const StreamKey& key, int pilot_size = 100'000) {
    if (target_rate <= 0.05 || target_rate >= 0.95)
        throw std::invalid_argument("calibration: target censoring must be in (0.05, 0.95)");
    SimScenario pilot = scenario;
    pilot.validate();

    Rng rng(key.child(stream_tag::calibration));
    const Eigen::MatrixXd chol_x = psd_cholesky(scenario.cov_x);
    std::vector<double> trunc(static_cast<std::size_t>(pilot_size));
    std::vector<double> fail(static_cast<std::size_t>(pilot_size));
    std::vector<double> unif(static_cast<std::size_t>(pilot_size));
    std::uint64_t rejections = 0;
    for (int i = 0; i < pilot_size; ++i) {
        const auto s = detail::draw_accepted(scenario, chol_x, rng, rejections);
        trunc[static_cast<std::size_t>(i)] = s.trunc;
        fail[static_cast<std::size_t>(i)] = s.fail;
        unif[static_cast<std::size_t>(i)] = rng.uniform();
    }
    auto censoring_rate = [&](double c) {
        long censored = 0;
        for (std::size_t i = 0; i < trunc.size(); ++i)
            if (fail[i] > trunc[i] + c * unif[i]) ++censored;
        return static_cast<double>(censored) / static_cast<double>(trunc.size());
    };

    double lo = 1e-3, hi = 1e3;
    if (censoring_rate(lo) < target_rate || censoring_rate(hi) > target_rate)
        throw NumericError("calibration: bracket does not straddle the target rate");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double rate = censoring_rate(mid);
        if (std::abs(rate - target_rate) <= 0.005) return mid;
        if (rate > target_rate)
            lo = mid;  // larger bound lowers the censoring rate
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace lbsimex
