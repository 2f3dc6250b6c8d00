#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>
#include <Eigen/Core>
#include <Eigen/LU>

#include "lbsimex/cohort.hpp"
#include "lbsimex/errors.hpp"
#include "lbsimex/km.hpp"
#include "lbsimex/link.hpp"
#include "lbsimex/monotone.hpp"

namespace lbsimex {

// How the at-risk process is weighted in the estimating equations.
//
//   uniform:       every subject with A_i <= t <= Y_i carries weight 1.
//                  Valid for any truncation-time law; the default.
//   length_biased: only uncensored subjects carry weight, equal to
//                  w(t - A_i) / w(Y_i - A_i) with w the integrated
//                  censoring survivor. Gains efficiency when truncation
//                  is uniform over a window covering the survival
//                  support, but is biased when it is not.
enum class RiskWeighting { uniform, length_biased };

struct FitOptions {
    double tol = 1e-8;
    int max_iter = 100;
    std::optional<Eigen::VectorXd> beta_init;
    RiskWeighting weighting = RiskWeighting::uniform;
};

struct FitResult {
    Eigen::VectorXd beta;
    MonotoneStep transform;  // H at the solution
    double score_norm = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
    bool ridge_used = false;
};

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double linf_norm(const Eigen::VectorXd& v) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (std::isnan(v[j])) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(v[j]));
    }
    return m;
}

inline double logaddexp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Softplus and logistic from one shared exponential.
inline void softplus_pair(double x, double& sp, double& sigma) {
    if (x > 35.0) {
        sp = x;
        sigma = 1.0;
    } else if (x < -35.0) {
        const double e = std::exp(x);
        sp = e;
        sigma = e;
    } else if (x >= 0.0) {
        const double e = std::exp(-x);
        sp = x + std::log1p(e);
        sigma = 1.0 / (1.0 + e);
    } else {
        const double e = std::exp(x);
        sp = std::log1p(e);
        sigma = e / (1.0 + e);
    }
}

}  // namespace detail

// Shared per-cohort machinery for the profile and score equations.
// Everything here depends on (A, Y, delta) only; the covariate matrix and
// beta vary per fit, so one workspace serves a whole SIMEX sweep.
class EstimatingEquations {
public:
    EstimatingEquations(const Cohort& cohort, RiskWeighting weighting)
        : cohort_(cohort), weighting_(weighting) {
        build_grid();
        if (weighting_ == RiskWeighting::length_biased) {
            survivor_ = km_censoring_survivor(cohort_);
            lb_base_.resize(cohort_.n());
            for (Eigen::Index i = 0; i < cohort_.n(); ++i) {
                if (cohort_.status(i) == 1) {
                    const double denom = survivor_.integral(cohort_.residual_time(i));
                    if (denom <= 0.0)
                        throw NumericError(
                            "length-biased weighting: integrated censoring survivor "
                            "vanishes for an uncensored subject");
                    lb_base_[i] = 1.0 / denom;
                } else {
                    lb_base_[i] = 0.0;
                }
            }
        }
    }

    const std::vector<double>& event_times() const { return times_; }
    const std::vector<double>& event_mult() const { return mult_; }

    // Sequentially solves the profile equation over ordered distinct
    // event times: with d_k events at t_k,
    //   sum_i R_i(t_k) r_i(t_k) [Lambda(lin_i + h) - Lambda(lin_i + H_{k-1})] = d_k,
    // each scalar equation by bracketed bisection (width 1e-12, one final
    // Newton polish); H(t_0) = -inf, so the values are non-decreasing by
    // construction.
    std::vector<double> profile(const Eigen::VectorXd& lin,
                                const TransformationLink& link) const {
        if (lin.size() != cohort_.n())
            throw std::invalid_argument("profile: linear predictor length mismatch");
        if (weighting_ == RiskWeighting::uniform && link.kind() == LinkKind::ph)
            return profile_ph_uniform(lin);
        return profile_generic(lin, link);
    }

    // Score vector sum_i sum_k Z_i [dN_i(t_k) - R_i r_i dLambda_ik]
    // evaluated at a given (beta, H); H normally comes from profile().
    Eigen::VectorXd score(const Eigen::MatrixXd& Z, const Eigen::VectorXd& lin,
                          const TransformationLink& link,
                          const std::vector<double>& H) const {
        if (Z.rows() != cohort_.n() || lin.size() != cohort_.n())
            throw std::invalid_argument("score: dimension mismatch");
        if (H.size() != times_.size())
            throw std::invalid_argument("score: transform length mismatch");
        if (weighting_ == RiskWeighting::uniform && link.kind() == LinkKind::ph)
            return score_ph_uniform(Z, lin, H);
        return score_generic(Z, lin, link, H);
    }

    // Damped Newton on beta with a central-difference Jacobian; profiles
    // H at every score evaluation.
    FitResult solve(const Eigen::MatrixXd& Z, const TransformationLink& link,
                    const FitOptions& options) const {
        const Eigen::Index p = Z.cols();
        Eigen::VectorXd beta = options.beta_init.value_or(Eigen::VectorXd::Zero(p));
        if (beta.size() != p)
            throw std::invalid_argument("solve: beta_init has wrong length");

        std::vector<double> H;
        auto evaluate = [&](const Eigen::VectorXd& b, std::vector<double>& h_out) {
            const Eigen::VectorXd lin = Z * b;
            h_out = profile(lin, link);
            return score(Z, lin, link, h_out);
        };

        FitResult result;
        Eigen::VectorXd u = evaluate(beta, H);
        double norm = detail::linf_norm(u);
        int iter = 0;
        for (; iter < options.max_iter && norm > options.tol; ++iter) {
            Eigen::MatrixXd jac(p, p);
            std::vector<double> h_scratch;
            for (Eigen::Index j = 0; j < p; ++j) {
                const double step = 1e-5 * (1.0 + std::abs(beta[j]));
                Eigen::VectorXd bp = beta, bm = beta;
                bp[j] += step;
                bm[j] -= step;
                const Eigen::VectorXd up = evaluate(bp, h_scratch);
                const Eigen::VectorXd um = evaluate(bm, h_scratch);
                jac.col(j) = (up - um) / (2.0 * step);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
            if (!lu.isInvertible() || !jac.allFinite()) {
                jac.diagonal().array() += 1e-8;
                lu.compute(jac);
                result.ridge_used = true;
                if (!lu.isInvertible()) break;  // hopeless direction; bail out flagged
            }
            const Eigen::VectorXd direction = lu.solve(-u);
            if (!direction.allFinite()) break;

            double lambda = 1.0;
            bool improved = false;
            for (int halving = 0; halving < 30; ++halving) {
                const Eigen::VectorXd trial = beta + lambda * direction;
                std::vector<double> h_trial;
                const Eigen::VectorXd u_trial = evaluate(trial, h_trial);
                const double norm_trial = detail::linf_norm(u_trial);
                if (norm_trial < norm) {
                    beta = trial;
                    u = u_trial;
                    norm = norm_trial;
                    H = std::move(h_trial);
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (!improved) break;
        }

        result.beta = std::move(beta);
        result.transform = MonotoneStep(times_, H);
        result.score_norm = norm;
        result.iterations = iter;
        result.converged = norm <= options.tol;
        return result;
    }

private:
    void build_grid() {
        const Eigen::Index n = cohort_.n();
        std::vector<double> ev;
        for (Eigen::Index i = 0; i < n; ++i)
            if (cohort_.status(i) == 1) ev.push_back(cohort_.obs_time(i));
        std::sort(ev.begin(), ev.end());
        for (std::size_t k = 0; k < ev.size();) {
            std::size_t j = k;
            while (j < ev.size() && ev[j] == ev[k]) ++j;
            times_.push_back(ev[k]);
            mult_.push_back(static_cast<double>(j - k));
            k = j;
        }
        const std::size_t K = times_.size();
        add_at_.assign(K, {});
        remove_after_.assign(K, {});
        jump_rows_.assign(K, {});
        for (Eigen::Index i = 0; i < n; ++i) {
            // risk interval on the event grid: first/last k with A_i <= t_k <= Y_i
            const auto lo = std::lower_bound(times_.begin(), times_.end(),
                                             cohort_.trunc_time(i));
            const auto hi = std::upper_bound(times_.begin(), times_.end(),
                                             cohort_.obs_time(i));
            const std::size_t enter = static_cast<std::size_t>(lo - times_.begin());
            if (hi == times_.begin()) continue;
            const std::size_t exit = static_cast<std::size_t>(hi - times_.begin()) - 1;
            if (enter > exit) continue;
            add_at_[enter].push_back(i);
            remove_after_[exit].push_back(i);
            if (cohort_.status(i) == 1) {
                const auto at = std::lower_bound(times_.begin(), times_.end(),
                                                 cohort_.obs_time(i));
                jump_rows_[static_cast<std::size_t>(at - times_.begin())].push_back(i);
            }
        }
    }

    // One monotone scalar profile step: expand a bracket upward from lo
    // (g(lo) < 0), then a bracket-safeguarded Newton iteration. Falls
    // back to a midpoint split whenever the Newton step leaves the
    // bracket, so convergence is global; terminates when the bracket or
    // step is below 1e-12.
    template <typename GEval>
    double solve_step(double lo, double initial_width, std::size_t k,
                      GEval&& evaluate) const {
        double width = std::max(initial_width, 1e-3);
        double hi = lo + width;
        int doublings = 0;
        while (evaluate(hi).first < 0.0) {
            if (++doublings > 200)
                throw NumericError("profile: bracket expansion failed at event time " +
                                   std::to_string(times_[k]));
            width *= 2.0;
            hi = lo + width;
        }
        double a = lo, b = hi;
        double h = 0.5 * (a + b);
        for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
            const auto [g, slope] = evaluate(h);
            if (g == 0.0) return h;
            if (g < 0.0)
                a = h;
            else
                b = h;
            double next = (std::isfinite(slope) && slope > 0.0) ? h - g / slope
                                                                : 0.5 * (a + b);
            if (!(next > a && next < b)) next = 0.5 * (a + b);
            if (std::abs(next - h) < 1e-13) return next;
            h = next;
        }
        return 0.5 * (a + b);
    }

    // ---- uniform weighting, PH link -------------------------------------
    //
    // Lambda = exp factorises, so the risk sum is a single scaled scalar
    // maintained incrementally across event times.

    struct ScaledSum {
        double scale_log = detail::kNegInf;  // M
        double sum = 0.0;                    // sum of exp(x - M)

        void add(double x) {
            if (x > scale_log) {
                sum = sum * std::exp(scale_log - x) + 1.0;
                scale_log = x;
            } else {
                sum += std::exp(x - scale_log);
            }
        }
        void remove(double x) { sum -= std::exp(x - scale_log); }
        double log_value() const {
            if (sum <= 0.0) return detail::kNegInf;
            return scale_log + std::log(sum);
        }
    };

    // The exponential link factorises the profile equation, so each step
    // has the closed-form root exp(H_k) = exp(H_{k-1}) + d_k / riskmass,
    // taken in log space to survive extreme linear predictors.
    std::vector<double> profile_ph_uniform(const Eigen::VectorXd& lin) const {
        const std::size_t K = times_.size();
        std::vector<double> H(K);
        ScaledSum risk;
        std::vector<Eigen::Index> active;
        double prev = detail::kNegInf;
        for (std::size_t k = 0; k < K; ++k) {
            for (Eigen::Index i : add_at_[k]) {
                risk.add(lin[i]);
                active.push_back(i);
            }
            if ((k & 31u) == 31u || risk.sum <= 0.0) rebuild(risk, active, lin);
            const double log_risk = risk.log_value();
            if (!std::isfinite(log_risk))
                throw NumericError("profile: zero risk-set weight at event time " +
                                   std::to_string(times_[k]));
            H[k] = detail::logaddexp(prev, std::log(mult_[k]) - log_risk);
            prev = H[k];
            for (Eigen::Index i : remove_after_[k]) {
                risk.remove(lin[i]);
                active.erase(std::find(active.begin(), active.end(), i));
            }
        }
        return H;
    }

    void rebuild(ScaledSum& risk, const std::vector<Eigen::Index>& active,
                 const Eigen::VectorXd& lin) const {
        ScaledSum fresh;
        double m = detail::kNegInf;
        for (Eigen::Index i : active) m = std::max(m, lin[i]);
        fresh.scale_log = m;
        double s = 0.0;
        for (Eigen::Index i : active) s += std::exp(lin[i] - m);
        fresh.sum = s;
        risk = fresh;
    }

    Eigen::VectorXd score_ph_uniform(const Eigen::MatrixXd& Z,
                                     const Eigen::VectorXd& lin,
                                     const std::vector<double>& H) const {
        const Eigen::Index p = Z.cols();
        Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
        // scaled vector sum T = sum_active Z_i exp(lin_i - M)
        double scale_log = detail::kNegInf;
        Eigen::VectorXd t_sum = Eigen::VectorXd::Zero(p);
        std::vector<Eigen::Index> active;
        auto rebuild_vec = [&]() {
            double m = detail::kNegInf;
            for (Eigen::Index i : active) m = std::max(m, lin[i]);
            t_sum.setZero();
            for (Eigen::Index i : active)
                t_sum += std::exp(lin[i] - m) * Z.row(i).transpose();
            scale_log = m;
        };
        double prev = detail::kNegInf;
        for (std::size_t k = 0; k < times_.size(); ++k) {
            for (Eigen::Index i : add_at_[k]) {
                active.push_back(i);
                if (lin[i] > scale_log) {
                    t_sum *= std::exp(scale_log - lin[i]);
                    scale_log = lin[i];
                }
                t_sum += std::exp(lin[i] - scale_log) * Z.row(i).transpose();
            }
            if ((k & 31u) == 31u) rebuild_vec();
            for (Eigen::Index i : jump_rows_[k]) u += Z.row(i).transpose();
            double log_diff;
            if (std::isfinite(prev)) {
                const double dh = H[k] - prev;
                log_diff = dh > 0.0 ? prev + std::log(std::expm1(dh)) : detail::kNegInf;
            } else {
                log_diff = H[k];
            }
            const double exponent = scale_log + log_diff;
            if (std::isfinite(exponent)) {
                const double factor = exponent > 700.0
                                          ? std::numeric_limits<double>::infinity()
                                          : std::exp(exponent);
                u -= factor * t_sum;
            }
            prev = H[k];
            for (Eigen::Index i : remove_after_[k]) {
                t_sum -= std::exp(lin[i] - scale_log) * Z.row(i).transpose();
                active.erase(std::find(active.begin(), active.end(), i));
            }
        }
        return u;
    }

    // ---- generic path: PO, custom links, length-biased weights ----------

    double cum_hazard_fast(const TransformationLink& link, double x) const {
        switch (link.kind()) {
            case LinkKind::ph: return std::exp(std::min(x, 709.0));
            case LinkKind::po: return TransformationLink::softplus(x);
            default: return link.cum_hazard(x);
        }
    }

    double hazard_fast(const TransformationLink& link, double x) const {
        switch (link.kind()) {
            case LinkKind::ph: return std::exp(std::min(x, 709.0));
            case LinkKind::po: return TransformationLink::logistic(x);
            default: return link.hazard(x);
        }
    }

    // Weight of active subject i at event k (the r-hat factor; 1 under
    // uniform weighting).
    double event_weight(Eigen::Index i, std::size_t k) const {
        if (weighting_ == RiskWeighting::uniform) return 1.0;
        const double base = lb_base_[i];
        if (base == 0.0) return 0.0;
        const double arg = times_[k] - cohort_.trunc_time(i);
        return base * survivor_.integral(std::max(arg, 0.0));
    }

    std::vector<double> profile_generic(const Eigen::VectorXd& lin,
                                        const TransformationLink& link) const {
        const std::size_t K = times_.size();
        const bool po_fast =
            link.kind() == LinkKind::po && weighting_ == RiskWeighting::uniform;
        std::vector<double> H(K);
        std::vector<Eigen::Index> active;
        std::vector<double> act_lin, act_w;
        double prev = detail::kNegInf;
        double prev_width = 1.0;
        for (std::size_t k = 0; k < K; ++k) {
            for (Eigen::Index i : add_at_[k]) active.push_back(i);
            act_lin.clear();
            act_w.clear();
            double w_total = 0.0;
            for (Eigen::Index i : active) {
                const double w = event_weight(i, k);
                if (w > 0.0) {
                    act_lin.push_back(lin[i]);
                    if (!po_fast) act_w.push_back(w);
                    w_total += w;
                }
            }
            if (w_total <= 0.0)
                throw NumericError("profile: zero risk-set weight at event time " +
                                   std::to_string(times_[k]));
            double base = 0.0;  // sum_i w_i Lambda(lin_i + H_{k-1})
            if (std::isfinite(prev)) {
                if (po_fast) {
                    double sp, sig;
                    for (const double x : act_lin) {
                        detail::softplus_pair(x + prev, sp, sig);
                        base += sp;
                    }
                } else {
                    for (std::size_t a = 0; a < act_lin.size(); ++a)
                        base += act_w[a] * cum_hazard_fast(link, act_lin[a] + prev);
                }
            }
            const double d_k = mult_[k];
            // fused value/derivative of the step equation
            auto evaluate = [&](double h) {
                double value = 0.0, slope = 0.0;
                if (po_fast) {
                    double sp, sig;
                    for (const double x : act_lin) {
                        detail::softplus_pair(x + h, sp, sig);
                        value += sp;
                        slope += sig;
                    }
                } else {
                    for (std::size_t a = 0; a < act_lin.size(); ++a) {
                        value += act_w[a] * cum_hazard_fast(link, act_lin[a] + h);
                        slope += act_w[a] * hazard_fast(link, act_lin[a] + h);
                    }
                }
                return std::pair<double, double>(value - base - d_k, slope);
            };
            double lo;
            if (std::isfinite(prev)) {
                lo = prev;
            } else {
                // pull the bracket floor down until the equation is negative
                lo = -8.0;
                int tries = 0;
                while (evaluate(lo).first >= 0.0 && tries++ < 200) lo -= 8.0;
            }
            H[k] = solve_step(lo, 2.0 * prev_width, k, evaluate);
            prev_width = std::isfinite(prev) ? (H[k] - prev) : 1.0;
            prev = H[k];
            for (Eigen::Index i : remove_after_[k])
                active.erase(std::find(active.begin(), active.end(), i));
        }
        return H;
    }

    Eigen::VectorXd score_generic(const Eigen::MatrixXd& Z, const Eigen::VectorXd& lin,
                                  const TransformationLink& link,
                                  const std::vector<double>& H) const {
        const Eigen::Index p = Z.cols();
        Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
        std::vector<Eigen::Index> active;
        double prev = detail::kNegInf;
        for (std::size_t k = 0; k < times_.size(); ++k) {
            for (Eigen::Index i : add_at_[k]) active.push_back(i);
            for (Eigen::Index i : jump_rows_[k]) u += Z.row(i).transpose();
            for (Eigen::Index i : active) {
                const double w = event_weight(i, k);
                if (w <= 0.0) continue;
                const double upper = cum_hazard_fast(link, lin[i] + H[k]);
                const double lower =
                    std::isfinite(prev) ? cum_hazard_fast(link, lin[i] + prev) : 0.0;
                u -= (w * (upper - lower)) * Z.row(i).transpose();
            }
            prev = H[k];
            for (Eigen::Index i : remove_after_[k])
                active.erase(std::find(active.begin(), active.end(), i));
        }
        return u;
    }

    const Cohort& cohort_;
    RiskWeighting weighting_;
    StepSurvivor survivor_;
    std::vector<double> lb_base_;

    std::vector<double> times_, mult_;
    std::vector<std::vector<Eigen::Index>> add_at_, remove_after_, jump_rows_;
};

inline MonotoneStep profile_transform(const Eigen::MatrixXd& Z, const Cohort& cohort,
                                      const TransformationLink& link,
                                      const Eigen::VectorXd& beta,
                                      RiskWeighting weighting = RiskWeighting::uniform) {
    EstimatingEquations eq(cohort, weighting);
    return MonotoneStep(eq.event_times(), eq.profile(Z * beta, link));
}

inline Eigen::VectorXd score(const Eigen::MatrixXd& Z, const Cohort& cohort,
                             const TransformationLink& link, const Eigen::VectorXd& beta,
                             const MonotoneStep& transform,
                             RiskWeighting weighting = RiskWeighting::uniform) {
    EstimatingEquations eq(cohort, weighting);
    return eq.score(Z, Z * beta, link, transform.values());
}

inline FitResult solve_beta(const Eigen::MatrixXd& Z, const Cohort& cohort,
                            const TransformationLink& link,
                            const FitOptions& options = {}) {
    EstimatingEquations eq(cohort, options.weighting);
    return eq.solve(Z, link, options);
}

// Plug the error-prone surrogate covariates straight into the estimating
// equations.
inline FitResult fit_naive(const Cohort& cohort, const TransformationLink& link,
                           const FitOptions& options = {}) {
    return solve_beta(cohort.surrogate(), cohort, link, options);
}

// Baseline using the true covariates (simulated data only).
inline FitResult fit_true(const Cohort& cohort, const TransformationLink& link,
                          const FitOptions& options = {}) {
    return solve_beta(cohort.truth(), cohort, link, options);
}

}  // namespace lbsimex
