#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>
#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include "lbsimex/cohort.hpp"
#include "lbsimex/errors.hpp"
#include "lbsimex/estimator.hpp"
#include "lbsimex/monotone.hpp"
#include "lbsimex/parallel.hpp"
#include "lbsimex/rng.hpp"

namespace lbsimex {

struct SimexConfig {
    int contamination_reps = 50;  // B; 500 at full scale
    std::vector<double> zeta_grid = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    std::uint64_t seed = 0;
    int bootstrap_reps = 200;
    // B used inside bootstrap refits; resampled estimates with a reduced
    // B carry slightly more simulation noise, so the SE errs upward.
    // Zero means "same as contamination_reps".
    int bootstrap_contamination_reps = 10;
    Eigen::MatrixXd error_cov;  // Sigma_eta, p x p symmetric PSD
    FitOptions fit;
    int workers = 1;
    double max_dropped_fraction = 0.2;

    void validate(Eigen::Index p) const {
        if (contamination_reps < 1)
            throw std::invalid_argument("simex: contamination_reps must be positive");
        if (bootstrap_contamination_reps < 0)
            throw std::invalid_argument("simex: bootstrap_contamination_reps must be >= 0");
        if (zeta_grid.size() < 3)
            throw std::invalid_argument("simex: zeta grid needs at least 3 points");
        if (zeta_grid.front() != 0.0)
            throw std::invalid_argument("simex: zeta grid must start at 0");
        for (std::size_t j = 1; j < zeta_grid.size(); ++j)
            if (zeta_grid[j] <= zeta_grid[j - 1])
                throw std::invalid_argument("simex: zeta grid must be strictly increasing");
        if (bootstrap_reps < 0)
            throw std::invalid_argument("simex: bootstrap_reps must be non-negative");
        if (error_cov.rows() != p || error_cov.cols() != p)
            throw std::invalid_argument("simex: error covariance has wrong shape");
    }
};

// Lower Cholesky factor with a small diagonal jitter retry, so exactly
// singular PSD matrices (including zero) are accepted.
inline Eigen::MatrixXd psd_cholesky(const Eigen::MatrixXd& cov) {
    if (!cov.isApprox(cov.transpose(), 1e-10))
        throw std::invalid_argument("covariance matrix is not symmetric");
    if (cov.isZero(0.0)) return Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::MatrixXd jittered = cov;
    jittered.diagonal().array() += 1e-12;
    llt.compute(jittered);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("covariance matrix is not positive semi-definite");
    return llt.matrixL();
}

// W(b, zeta) = W + sqrt(zeta) * eta L^T with eta standard normal rows.
// zeta = 0 returns W without consuming any draws.
inline Eigen::MatrixXd contaminate(const Eigen::MatrixXd& W, double zeta,
                                   const Eigen::MatrixXd& error_cov, Rng& rng) {
    if (zeta < 0.0) throw std::invalid_argument("contaminate: zeta must be >= 0");
    if (zeta == 0.0) return W;
    const Eigen::MatrixXd L = psd_cholesky(error_cov);
    const Eigen::MatrixXd eta = rng.normal_matrix(W.rows(), W.cols());
    return W + std::sqrt(zeta) * (eta * L.transpose());
}

// Per-coordinate ordinary least squares quadratic in zeta.
struct ExtrapolationFit {
    Eigen::MatrixXd gamma;          // 3 x p, rows (g0, g1, g2)
    Eigen::VectorXd at_minus_one;   // g0 - g1 + g2 per coordinate
    Eigen::MatrixXd residuals;      // grid x p

    double predict(double zeta, Eigen::Index j) const {
        return gamma(0, j) + gamma(1, j) * zeta + gamma(2, j) * zeta * zeta;
    }
};

inline ExtrapolationFit fit_quadratic_extrapolant(const std::vector<double>& zetas,
                                                  const Eigen::MatrixXd& values) {
    const auto m = static_cast<Eigen::Index>(zetas.size());
    if (values.rows() != m)
        throw std::invalid_argument("extrapolation: grid/value size mismatch");
    if (m < 3)
        throw std::invalid_argument("extrapolation: quadratic fit needs >= 3 grid points");
    Eigen::MatrixXd design(m, 3);
    for (Eigen::Index r = 0; r < m; ++r) {
        const double z = zetas[static_cast<std::size_t>(r)];
        design(r, 0) = 1.0;
        design(r, 1) = z;
        design(r, 2) = z * z;
    }
    ExtrapolationFit fit;
    fit.gamma = design.colPivHouseholderQr().solve(values);
    fit.residuals = values - design * fit.gamma;
    fit.at_minus_one = (fit.gamma.row(0) - fit.gamma.row(1) + fit.gamma.row(2)).transpose();
    return fit;
}

struct SimexPath {
    std::vector<double> zetas;
    Eigen::MatrixXd beta_by_zeta;              // grid x p averages over b
    std::vector<Eigen::MatrixXd> raw_fits;     // per zeta: B x p (NaN row = dropped)
    int dropped_fits = 0;
};

struct SimexResult {
    SimexPath path;
    ExtrapolationFit extrapolation;
    Eigen::VectorXd beta;  // prediction at zeta = -1
    FitResult naive;       // the zeta = 0 fit
};

namespace detail {

// Contamination noise for level b, replayed from its own substream so the
// transform stage can regenerate identical draws.
inline Eigen::MatrixXd contamination_noise(const StreamKey& key, int b, Eigen::Index n,
                                           Eigen::Index p) {
    Rng rng(key.child(stream_tag::contaminate).child(static_cast<std::uint64_t>(b)));
    return rng.normal_matrix(n, p);
}

}  // namespace detail

// Stages 1-3: contaminate at each zeta, refit, average over b, fit the
// quadratic extrapolant, predict at zeta = -1. Deterministic given
// (key, config, cohort); the b-loop parallelises with index-ordered
// reduction so the worker count never changes the result.
inline SimexResult simex_beta(const Cohort& cohort, const TransformationLink& link,
                              const SimexConfig& config, const StreamKey& key) {
    config.validate(cohort.dim());
    const Eigen::Index n = cohort.n();
    const Eigen::Index p = cohort.dim();
    const auto n_zeta = static_cast<Eigen::Index>(config.zeta_grid.size());
    const int B = config.contamination_reps;
    const Eigen::MatrixXd L = psd_cholesky(config.error_cov);

    EstimatingEquations eq(cohort, config.fit.weighting);

    // zeta = 0 is contamination-free, so it is one shared fit.
    FitResult naive = eq.solve(cohort.surrogate(), link, config.fit);

    // raw_fits[z](b, j); dropped fits are left as NaN
    std::vector<Eigen::MatrixXd> raw(static_cast<std::size_t>(n_zeta));
    for (auto& m : raw)
        m = Eigen::MatrixXd::Constant(B, p, std::numeric_limits<double>::quiet_NaN());
    if (naive.converged)
        for (int b = 0; b < B; ++b) raw[0].row(b) = naive.beta.transpose();

    parallel_for(B, config.workers, [&](int b) {
        const Eigen::MatrixXd eta = detail::contamination_noise(key, b, n, p);
        const Eigen::MatrixXd shift = eta * L.transpose();
        Eigen::VectorXd warm = naive.converged ? naive.beta : Eigen::VectorXd::Zero(p);
        for (Eigen::Index z = 1; z < n_zeta; ++z) {
            const double zeta = config.zeta_grid[static_cast<std::size_t>(z)];
            const Eigen::MatrixXd Wz = cohort.surrogate() + std::sqrt(zeta) * shift;
            FitOptions opts = config.fit;
            opts.beta_init = warm;
            const FitResult fit = eq.solve(Wz, link, opts);
            if (fit.converged) {
                raw[static_cast<std::size_t>(z)].row(b) = fit.beta.transpose();
                warm = fit.beta;
            }
        }
    });

    SimexPath path;
    path.zetas = config.zeta_grid;
    path.beta_by_zeta.resize(n_zeta, p);
    path.raw_fits = raw;
    for (Eigen::Index z = 0; z < n_zeta; ++z) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
        int kept = 0;
        for (int b = 0; b < B; ++b) {
            if (raw[static_cast<std::size_t>(z)].row(b).allFinite()) {
                mean += raw[static_cast<std::size_t>(z)].row(b).transpose();
                ++kept;
            }
        }
        const int dropped = B - kept;
        path.dropped_fits += (z == 0) ? 0 : dropped;
        if (kept == 0 ||
            static_cast<double>(dropped) > config.max_dropped_fraction * B)
            throw NumericError("simex: unstable contamination at zeta = " +
                               std::to_string(path.zetas[static_cast<std::size_t>(z)]) +
                               " (" + std::to_string(dropped) + "/" + std::to_string(B) +
                               " fits dropped)");
        path.beta_by_zeta.row(z) = (mean / kept).transpose();
    }
    if (!naive.converged)
        throw NumericError("simex: the zeta = 0 fit did not converge");

    SimexResult result;
    result.extrapolation = fit_quadratic_extrapolant(path.zetas, path.beta_by_zeta);
    result.beta = result.extrapolation.at_minus_one;
    result.path = std::move(path);
    result.naive = std::move(naive);
    return result;
}

// Convenience overload keying all randomness from config.seed.
inline SimexResult simex_beta(const Cohort& cohort, const TransformationLink& link,
                              const SimexConfig& config) {
    return simex_beta(cohort, link, config, StreamKey::root(config.seed));
}

struct SimexTransform {
    MonotoneStep transform;
    double monotonicity_adjustment = 0.0;  // largest pooling repair applied
};

// Stage 4: profile the transform at beta_simex for every replayed
// (b, zeta) contamination, average over b, extrapolate each event time to
// zeta = -1, then restore monotonicity by pooling adjacent violators.
inline SimexTransform simex_transform(const Cohort& cohort, const TransformationLink& link,
                                      const SimexConfig& config, const StreamKey& key,
                                      const Eigen::VectorXd& beta_simex) {
    config.validate(cohort.dim());
    const Eigen::Index n = cohort.n();
    const Eigen::Index p = cohort.dim();
    const auto n_zeta = static_cast<Eigen::Index>(config.zeta_grid.size());
    const int B = config.contamination_reps;
    const Eigen::MatrixXd L = psd_cholesky(config.error_cov);

    EstimatingEquations eq(cohort, config.fit.weighting);
    const auto K = static_cast<Eigen::Index>(eq.event_times().size());

    std::vector<Eigen::MatrixXd> sums(static_cast<std::size_t>(B));
    parallel_for(B, config.workers, [&](int b) {
        Eigen::MatrixXd per_zeta(n_zeta, K);
        const Eigen::MatrixXd eta = detail::contamination_noise(key, b, n, p);
        const Eigen::MatrixXd shift = eta * L.transpose();
        for (Eigen::Index z = 0; z < n_zeta; ++z) {
            const double zeta = config.zeta_grid[static_cast<std::size_t>(z)];
            const Eigen::MatrixXd Wz =
                zeta == 0.0 ? cohort.surrogate()
                            : (cohort.surrogate() + std::sqrt(zeta) * shift).eval();
            const std::vector<double> H = eq.profile(Wz * beta_simex, link);
            for (Eigen::Index k = 0; k < K; ++k)
                per_zeta(z, k) = H[static_cast<std::size_t>(k)];
        }
        sums[static_cast<std::size_t>(b)] = per_zeta;
    });

    Eigen::MatrixXd averaged = Eigen::MatrixXd::Zero(n_zeta, K);
    for (int b = 0; b < B; ++b) averaged += sums[static_cast<std::size_t>(b)];
    averaged /= B;

    const ExtrapolationFit fit = fit_quadratic_extrapolant(config.zeta_grid, averaged);
    std::vector<double> values(static_cast<std::size_t>(K));
    for (Eigen::Index k = 0; k < K; ++k)
        values[static_cast<std::size_t>(k)] = fit.at_minus_one[k];
    const double adjustment = pool_adjacent_violators(values);

    SimexTransform out;
    out.transform = MonotoneStep(eq.event_times(), values);
    out.monotonicity_adjustment = adjustment;
    return out;
}

struct BootstrapInterval {
    Eigen::VectorXd estimate;
    Eigen::VectorXd se;
    Eigen::VectorXd lower;  // estimate - 1.96 se
    Eigen::VectorXd upper;
    int redraws = 0;
};

// Nonparametric bootstrap of an arbitrary estimator: resample subjects
// with replacement, re-estimate per resample, report the SD of the
// resampled estimates and the Wald interval around the point estimate.
template <typename Fitter>
BootstrapInterval bootstrap_interval(const Cohort& cohort, int reps,
                                     const StreamKey& key, int workers,
                                     const Eigen::VectorXd& point, Fitter&& fitter) {
    if (reps < 2) throw std::invalid_argument("bootstrap: needs at least 2 resamples");
    const Eigen::Index n = cohort.n();
    const auto boot_key = key.child(stream_tag::bootstrap);

    std::vector<Eigen::VectorXd> estimates(static_cast<std::size_t>(reps));
    std::vector<int> redraw_counts(static_cast<std::size_t>(reps), 0);
    parallel_for(reps, workers, [&](int r) {
        Rng rng(boot_key.child(static_cast<std::uint64_t>(r)));
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        int attempts = 0;
        while (true) {
            if (++attempts > 100)
                throw NumericError("bootstrap: no events after 100 resample attempts");
            bool has_event = false;
            for (auto& id : idx) {
                id = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(n));
                if (cohort.status(id) == 1) has_event = true;
            }
            if (has_event) break;
            ++redraw_counts[static_cast<std::size_t>(r)];
        }
        estimates[static_cast<std::size_t>(r)] =
            fitter(cohort.resample(idx), boot_key.child(0x5f17ULL).child(
                                             static_cast<std::uint64_t>(r)));
    });

    const Eigen::Index p = point.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    for (const auto& e : estimates) mean += e;
    mean /= reps;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(p);
    for (const auto& e : estimates) var += (e - mean).cwiseProduct(e - mean);
    var /= (reps - 1);

    BootstrapInterval out;
    out.estimate = point;
    out.se = var.cwiseSqrt();
    out.lower = point - 1.96 * out.se;
    out.upper = point + 1.96 * out.se;
    for (int c : redraw_counts) out.redraws += c;
    return out;
}

// Bootstrap SE and 95% Wald interval for the extrapolated estimator.
inline BootstrapInterval bootstrap_ci(const Cohort& cohort, const TransformationLink& link,
                                      const SimexConfig& config, const StreamKey& key,
                                      const Eigen::VectorXd& point) {
    SimexConfig inner = config;
    inner.workers = 1;  // parallelism lives at the resample level
    if (config.bootstrap_contamination_reps > 0)
        inner.contamination_reps =
            std::min(config.contamination_reps, config.bootstrap_contamination_reps);
    return bootstrap_interval(
        cohort, config.bootstrap_reps, key, config.workers, point,
        [&](const Cohort& resampled, const StreamKey& fit_key) {
            return simex_beta(resampled, link, inner, fit_key).beta;
        });
}

}  // namespace lbsimex
