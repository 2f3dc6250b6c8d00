#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>
#include <Eigen/Core>

#include "lbsimex/cohort.hpp"
#include "lbsimex/datagen.hpp"
#include "lbsimex/errors.hpp"
#include "lbsimex/estimator.hpp"
#include "lbsimex/parallel.hpp"
#include "lbsimex/report.hpp"
#include "lbsimex/rng.hpp"
#include "lbsimex/simex.hpp"

namespace lbsimex {

enum class Method { true_covariate, naive, simex };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::true_covariate: return "true";
        case Method::naive: return "naive";
        default: return "simex";
    }
}

inline Method parse_method(const std::string& s) {
    if (s == "true") return Method::true_covariate;
    if (s == "naive") return Method::naive;
    if (s == "simex") return Method::simex;
    throw std::invalid_argument("unknown method: " + s);
}

struct SimulationOptions {
    SimScenario scenario;
    std::vector<Method> methods = {Method::naive, Method::simex, Method::true_covariate};
    int replications = 200;
    SimexConfig simex;  // error_cov is filled from the scenario when empty
    std::uint64_t seed = 0;
    int workers = 1;
};

struct SimulationOutput {
    std::vector<SummaryRow> rows;
    double censor_upper = 0.0;
    int regenerated = 0;
    std::string health_warning;
};

inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

namespace detail {

struct ReplicateEstimates {
    std::vector<Eigen::VectorXd> estimate;  // per method
    std::vector<Eigen::VectorXd> lower, upper;
    int regenerated = 0;
};

}  // namespace detail

// Runs the full simulation study: generate a prevalent cohort per
// replicate, fit every requested method, bootstrap a Wald interval for
// each (skipped when bootstrap_reps is zero), and aggregate Bias, Var,
// MSE and CP against the generating coefficients. Deterministic for a
// given seed, independent of the worker count.
inline SimulationOutput run_simulation(const SimulationOptions& options) {
    if (options.replications < 2)
        throw std::invalid_argument("simulation: needs at least 2 replications");
    const SimScenario& scenario = options.scenario;
    scenario.validate();
    const Eigen::Index p = scenario.dim();
    const auto link = scenario.link == LinkKind::ph ? TransformationLink::ph()
                                                    : TransformationLink::po();

    SimexConfig simex_cfg = options.simex;
    if (simex_cfg.error_cov.size() == 0) simex_cfg.error_cov = scenario.error_cov();
    simex_cfg.workers = 1;  // parallelism lives at the replicate level
    const FitOptions fit_opts = simex_cfg.fit;

    const auto root = StreamKey::root(options.seed);
    const double censor_upper =
        calibrate_censoring(scenario, scenario.target_censoring, root);

    const int reps = options.replications;
    std::vector<detail::ReplicateEstimates> results(static_cast<std::size_t>(reps));

    parallel_for(reps, options.workers, [&](int r) {
        auto& slot = results[static_cast<std::size_t>(r)];
        const auto rep_key = root.child(stream_tag::replicate).child(
            static_cast<std::uint64_t>(r));
        for (int attempt = 0;; ++attempt) {
            if (attempt > 20)
                throw NumericError("simulation: replicate " + std::to_string(r) +
                                   " failed repeatedly");
            const auto attempt_key = rep_key.child(static_cast<std::uint64_t>(attempt));
            try {
                Rng gen(attempt_key.child(stream_tag::datagen));
                const Cohort cohort = draw_prevalent_cohort(scenario, censor_upper, gen);
                detail::ReplicateEstimates est;
                est.regenerated = attempt;
                for (std::size_t m = 0; m < options.methods.size(); ++m) {
                    const Method method = options.methods[m];
                    const auto method_key = attempt_key.child(0x100 + m);
                    Eigen::VectorXd point;
                    std::optional<SimexResult> simex_fit;
                    if (method == Method::simex) {
                        simex_fit = simex_beta(cohort, link, simex_cfg, method_key);
                        point = simex_fit->beta;
                    } else {
                        const FitResult fit = method == Method::naive
                                                  ? fit_naive(cohort, link, fit_opts)
                                                  : fit_true(cohort, link, fit_opts);
                        if (!fit.converged)
                            throw NumericError("simulation: point fit did not converge");
                        point = fit.beta;
                    }
                    est.estimate.push_back(point);
                    if (simex_cfg.bootstrap_reps > 0) {
                        BootstrapInterval ci;
                        if (method == Method::simex) {
                            ci = bootstrap_ci(cohort, link, simex_cfg, method_key, point);
                        } else {
                            ci = bootstrap_interval(
                                cohort, simex_cfg.bootstrap_reps, method_key, 1, point,
                                [&](const Cohort& resampled, const StreamKey&) {
                                    const FitResult f =
                                        method == Method::naive
                                            ? fit_naive(resampled, link, fit_opts)
                                            : fit_true(resampled, link, fit_opts);
                                    if (!f.converged)
                                        throw NumericError("bootstrap fit diverged");
                                    return f.beta;
                                });
                        }
                        est.lower.push_back(ci.lower);
                        est.upper.push_back(ci.upper);
                    }
                }
                slot = std::move(est);
                return;
            } catch (const ValidationError&) {
                continue;  // regenerate from the next substream
            } catch (const NumericError&) {
                continue;
            }
        }
    });

    SimulationOutput out;
    out.censor_upper = censor_upper;
    for (const auto& r : results) out.regenerated += r.regenerated;
    if (out.regenerated > 0.05 * reps)
        out.health_warning = "scenario health: " + std::to_string(out.regenerated) +
                             " regenerated replicates out of " + std::to_string(reps);

    for (std::size_t m = 0; m < options.methods.size(); ++m) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
        for (const auto& r : results) mean += r.estimate[m];
        mean /= reps;
        Eigen::VectorXd variance = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd mse = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd covers = Eigen::VectorXd::Zero(p);
        for (const auto& r : results) {
            variance += (r.estimate[m] - mean).cwiseAbs2();
            mse += (r.estimate[m] - scenario.beta0).cwiseAbs2();
            if (!r.lower.empty())
                for (Eigen::Index j = 0; j < p; ++j)
                    covers[j] += (r.lower[m][j] <= scenario.beta0[j] &&
                                  scenario.beta0[j] <= r.upper[m][j]);
        }
        SummaryRow row;
        row.model = to_string(scenario.link);
        row.censoring_rate = scenario.target_censoring;
        row.sigma_eta = scenario.sigma_eta;
        row.method = to_string(options.methods[m]);
        row.bias = mean - scenario.beta0;
        row.variance = variance / (reps - 1);
        row.mse = mse / reps;
        row.cp = simex_cfg.bootstrap_reps > 0
                     ? (100.0 / reps * covers).eval()
                     : Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN())
                           .eval();
        out.rows.push_back(std::move(row));
    }
    return out;
}

// Sensitivity protocol for data without a known error covariance: take
// Sigma = sample covariance of W, then for each sigma_e refit with
// Sigma_eta = Sigma + sigma_e I, reporting estimate / SE / p-value per
// coordinate next to the uncorrected fit.
inline std::vector<SensitivityRow> sensitivity_analysis(
    const Cohort& cohort, const TransformationLink& link,
    const std::vector<double>& sigma_e_grid, const SimexConfig& config,
    const StreamKey& key) {
    const Eigen::Index p = cohort.dim();
    const Eigen::MatrixXd& W = cohort.surrogate();
    const Eigen::RowVectorXd mean = W.colwise().mean();
    const Eigen::MatrixXd centered = W.rowwise() - mean;
    const Eigen::MatrixXd sample_cov =
        centered.transpose() * centered / static_cast<double>(cohort.n() - 1);

    std::vector<SensitivityRow> rows;
    for (std::size_t g = 0; g < sigma_e_grid.size(); ++g) {
        const double sigma_e = sigma_e_grid[g];
        if (sigma_e < 0.0 || sigma_e > 1.0)
            throw std::invalid_argument("sensitivity: sigma_e must lie in [0, 1]");
        SimexConfig cfg = config;
        cfg.error_cov = sample_cov + sigma_e * Eigen::MatrixXd::Identity(p, p);
        const auto run_key = key.child(0x200 + g);
        const SimexResult fit = simex_beta(cohort, link, cfg, run_key);
        const BootstrapInterval ci = bootstrap_ci(cohort, link, cfg, run_key, fit.beta);
        SensitivityRow row;
        row.model = to_string(link.kind());
        row.sigma_e = sigma_e;
        row.method = "simex";
        row.estimate = fit.beta;
        row.se = ci.se;
        row.p_value.resize(p);
        for (Eigen::Index j = 0; j < p; ++j)
            row.p_value[j] = normal_two_sided_p(fit.beta[j] / ci.se[j]);
        rows.push_back(std::move(row));
    }

    const FitResult naive = fit_naive(cohort, link, config.fit);
    if (!naive.converged) throw NumericError("sensitivity: naive fit did not converge");
    const BootstrapInterval naive_ci = bootstrap_interval(
        cohort, config.bootstrap_reps, key.child(0x2ffULL), config.workers, naive.beta,
        [&](const Cohort& resampled, const StreamKey&) {
            const FitResult f = fit_naive(resampled, link, config.fit);
            if (!f.converged) throw NumericError("bootstrap fit diverged");
            return f.beta;
        });
    SensitivityRow naive_row;
    naive_row.model = to_string(link.kind());
    naive_row.sigma_e = std::numeric_limits<double>::quiet_NaN();
    naive_row.method = "naive";
    naive_row.estimate = naive.beta;
    naive_row.se = naive_ci.se;
    naive_row.p_value.resize(p);
    for (Eigen::Index j = 0; j < p; ++j)
        naive_row.p_value[j] = normal_two_sided_p(naive.beta[j] / naive_ci.se[j]);
    rows.push_back(std::move(naive_row));
    return rows;
}

}  // namespace lbsimex
