#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "lbsimex/cohort.hpp"
#include "lbsimex/errors.hpp"

namespace lbsimex {

// Right-continuous non-increasing step function starting at 1, with the
// running integral precomputed at the jumps so integral() is a binary
// search plus a linear remainder.
class StepSurvivor {
public:
    StepSurvivor() = default;

    // jump_times strictly increasing, value_after[j] = survivor just after jump j.
    StepSurvivor(std::vector<double> jump_times, std::vector<double> value_after)
        : times_(std::move(jump_times)), values_(std::move(value_after)) {
        if (times_.size() != values_.size())
            throw std::invalid_argument("step survivor: size mismatch");
        for (std::size_t j = 0; j < times_.size(); ++j) {
            if (times_[j] <= 0.0 || (j > 0 && times_[j] <= times_[j - 1]))
                throw std::invalid_argument("step survivor: jump times not increasing");
            if (values_[j] < 0.0 || values_[j] > 1.0 ||
                (j > 0 && values_[j] > values_[j - 1]))
                throw std::invalid_argument("step survivor: values not a survivor");
        }
        areas_.resize(times_.size());
        double area = 0.0, prev_t = 0.0, prev_v = 1.0;
        for (std::size_t j = 0; j < times_.size(); ++j) {
            area += (times_[j] - prev_t) * prev_v;
            areas_[j] = area;
            prev_t = times_[j];
            prev_v = values_[j];
        }
    }

    double value(double t) const {
        if (t < 0.0) throw std::invalid_argument("survivor evaluated at negative time");
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return 1.0;
        return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

    // w(t) = integral of the survivor over [0, t].
    double integral(double t) const {
        if (t < 0.0) throw std::invalid_argument("survivor integral at negative time");
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return t;
        const std::size_t j = static_cast<std::size_t>(it - times_.begin()) - 1;
        return areas_[j] + (t - times_[j]) * values_[j];
    }

    const std::vector<double>& jump_times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> times_, values_;
    std::vector<double> areas_;
};

// Product-limit estimator from (time, event) pairs. Ties at a time are
// handled in one risk-set step: the risk set counts everyone still in
// the sample at that time, events divide it, then all tied subjects
// leave. Beyond the last observation the curve keeps its last value.
inline StepSurvivor km_product_limit(const std::vector<double>& times,
                                     const std::vector<int>& events) {
    if (times.size() != events.size())
        throw std::invalid_argument("product-limit: size mismatch");
    const std::size_t m = times.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    std::vector<double> jump_times, values;
    double surv = 1.0;
    std::size_t i = 0;
    while (i < m) {
        const double t = times[order[i]];
        std::size_t j = i;
        long d = 0;
        while (j < m && times[order[j]] == t) {
            if (events[order[j]] == 1) ++d;
            ++j;
        }
        const auto at_risk = static_cast<long>(m - i);
        if (d > 0 && t > 0.0) {
            surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            jump_times.push_back(t);
            values.push_back(surv);
        }
        i = j;
    }
    return StepSurvivor(std::move(jump_times), std::move(values));
}

// Kaplan-Meier estimator of the censoring survivor on the residual
// timescale: inputs (V_i = Y_i - A_i, 1 - delta_i). An observed censoring
// is the "event" here; a failure removes the subject from the risk set.
inline StepSurvivor km_censoring_survivor(const Cohort& cohort) {
    const Eigen::Index n = cohort.n();
    bool any_positive = false;
    std::vector<double> v(static_cast<std::size_t>(n));
    std::vector<int> cens(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(i)] = cohort.residual_time(i);
        cens[static_cast<std::size_t>(i)] = 1 - cohort.status(i);
        if (cohort.residual_time(i) > 0.0) any_positive = true;
    }
    if (!any_positive)
        throw NumericError("censoring survivor: all residual times are zero");
    return km_product_limit(v, cens);
}

inline double w_integral(const StepSurvivor& survivor, double t) {
    return survivor.integral(t);
}

// Length-bias correction weight, residual timescale in both arguments:
// delta_i * w(t - A_i) / w(Y_i - A_i). Zero for censored subjects. Only
// meaningful multiplied by the at-risk indicator, so t in [A_i, Y_i].
inline double weight_r(const StepSurvivor& survivor, double t, double y_i,
                       int delta_i, double a_i) {
    if (delta_i == 0) return 0.0;
    if (t < 0.0) throw std::invalid_argument("weight_r evaluated at negative time");
    const double denom = survivor.integral(y_i - a_i);
    if (denom <= 0.0)
        throw NumericError("weight_r: integrated censoring survivor vanishes at Y - A");
    const double num = survivor.integral(std::max(t - a_i, 0.0));
    return num / denom;
}

}  // namespace lbsimex
