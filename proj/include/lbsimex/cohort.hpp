#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>
#include <Eigen/Core>

#include "lbsimex/errors.hpp"

namespace lbsimex {

// One observed prevalent-cohort subject.
struct SubjectRecord {
    double trunc_time = 0.0;            // A, entry delay
    double obs_time = 0.0;              // Y = min(T, A + C)
    int status = 0;                     // 1 = failure observed, 0 = censored
    Eigen::VectorXd surrogate;          // W, error-prone covariates
    std::optional<Eigen::VectorXd> truth;  // X, kept by the data generator
};

// Immutable validated sample. Column storage; rows are subjects.
class Cohort {
public:
    static Cohort validate(const std::vector<SubjectRecord>& subjects) {
        const auto violations = check(subjects);
        if (!violations.empty())
            throw ValidationError(describe(violations), violations);
        const std::size_t n = subjects.size();
        const auto p = subjects.front().surrogate.size();
        Cohort c;
        c.trunc_.resize(n);
        c.obs_.resize(n);
        c.status_.resize(n);
        c.surrogate_.resize(n, p);
        const bool with_truth = subjects.front().truth.has_value();
        if (with_truth) c.truth_.emplace(n, p);
        for (std::size_t i = 0; i < n; ++i) {
            c.trunc_[i] = subjects[i].trunc_time;
            c.obs_[i] = subjects[i].obs_time;
            c.status_[i] = subjects[i].status;
            c.surrogate_.row(i) = subjects[i].surrogate.transpose();
            if (with_truth) c.truth_->row(i) = subjects[i].truth->transpose();
        }
        return c;
    }

    static Cohort from_columns(Eigen::VectorXd trunc, Eigen::VectorXd obs,
                               std::vector<int> status, Eigen::MatrixXd surrogate,
                               std::optional<Eigen::MatrixXd> truth = std::nullopt) {
        Cohort c;
        c.trunc_ = std::move(trunc);
        c.obs_ = std::move(obs);
        c.status_ = std::move(status);
        c.surrogate_ = std::move(surrogate);
        c.truth_ = std::move(truth);
        const auto violations = c.check_self();
        if (!violations.empty())
            throw ValidationError(describe(violations), violations);
        return c;
    }

    // Non-throwing rule check over raw subjects.
    static std::vector<Violation> check(const std::vector<SubjectRecord>& subjects) {
        std::vector<Violation> out;
        if (subjects.empty()) {
            out.push_back({0, "empty", "cohort has no subjects"});
            return out;
        }
        const auto p = subjects.front().surrogate.size();
        std::size_t events = 0;
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            const auto& s = subjects[i];
            check_row(out, i, s.trunc_time, s.obs_time, s.status, s.surrogate, p);
            if (s.truth && s.truth->size() != p)
                out.push_back({i, "dimension", "truth covariate length differs from surrogate"});
            if (s.status == 1) ++events;
        }
        if (events == 0) out.push_back({0, "no events", "no subject has status 1"});
        return out;
    }

    Eigen::Index n() const { return trunc_.size(); }
    Eigen::Index dim() const { return surrogate_.cols(); }

    double trunc_time(Eigen::Index i) const { return trunc_[i]; }
    double obs_time(Eigen::Index i) const { return obs_[i]; }
    int status(Eigen::Index i) const { return status_[i]; }
    double residual_time(Eigen::Index i) const { return obs_[i] - trunc_[i]; }

    const Eigen::VectorXd& trunc_times() const { return trunc_; }
    const Eigen::VectorXd& obs_times() const { return obs_; }
    const std::vector<int>& statuses() const { return status_; }
    const Eigen::MatrixXd& surrogate() const { return surrogate_; }
    bool has_truth() const { return truth_.has_value(); }
    const Eigen::MatrixXd& truth() const {
        if (!truth_) throw std::logic_error("cohort carries no true covariates");
        return *truth_;
    }

    Eigen::Index num_events() const {
        Eigen::Index k = 0;
        for (int s : status_) k += (s == 1);
        return k;
    }

    // Bootstrap resample; caller guarantees the index set has an event.
    Cohort resample(const std::vector<Eigen::Index>& idx) const {
        Cohort c;
        const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
        c.trunc_.resize(m);
        c.obs_.resize(m);
        c.status_.resize(m);
        c.surrogate_.resize(m, dim());
        if (truth_) c.truth_.emplace(m, dim());
        for (Eigen::Index r = 0; r < m; ++r) {
            const Eigen::Index i = idx[static_cast<std::size_t>(r)];
            c.trunc_[r] = trunc_[i];
            c.obs_[r] = obs_[i];
            c.status_[r] = status_[i];
            c.surrogate_.row(r) = surrogate_.row(i);
            if (truth_) c.truth_->row(r) = truth_->row(i);
        }
        return c;
    }

private:
    Cohort() = default;

    static void check_row(std::vector<Violation>& out, std::size_t i, double a,
                          double y, int status, const Eigen::VectorXd& w,
                          Eigen::Index p) {
        if (!std::isfinite(a) || !std::isfinite(y))
            out.push_back({i, "non-finite time", "trunc_time or obs_time is not finite"});
        else {
            if (a < 0.0) out.push_back({i, "negative time", "trunc_time is negative"});
            if (y <= 0.0) out.push_back({i, "non-positive time", "obs_time must be positive"});
            if (a > y)
                out.push_back({i, "truncation exceeds observed time",
                               "trunc_time " + std::to_string(a) + " > obs_time " +
                                   std::to_string(y)});
            if (status == 1 && a == y)
                out.push_back({i, "event at entry", "failure at zero residual time"});
        }
        if (status != 0 && status != 1)
            out.push_back({i, "status", "status must be 0 or 1"});
        if (w.size() != p)
            out.push_back({i, "dimension", "covariate length differs across subjects"});
        for (Eigen::Index j = 0; j < w.size(); ++j)
            if (!std::isfinite(w[j])) {
                out.push_back({i, "non-finite covariate", "surrogate has a non-finite entry"});
                break;
            }
    }

    std::vector<Violation> check_self() const {
        std::vector<Violation> out;
        if (trunc_.size() != obs_.size() ||
            trunc_.size() != static_cast<Eigen::Index>(status_.size()) ||
            trunc_.size() != surrogate_.rows()) {
            out.push_back({0, "shape", "column lengths differ"});
            return out;
        }
        if (trunc_.size() == 0) {
            out.push_back({0, "empty", "cohort has no subjects"});
            return out;
        }
        if (truth_ && (truth_->rows() != trunc_.size() || truth_->cols() != surrogate_.cols()))
            out.push_back({0, "shape", "truth matrix shape differs from surrogate"});
        std::size_t events = 0;
        for (Eigen::Index i = 0; i < trunc_.size(); ++i) {
            check_row(out, static_cast<std::size_t>(i), trunc_[i], obs_[i],
                      status_[static_cast<std::size_t>(i)],
                      surrogate_.row(i).transpose(), surrogate_.cols());
            if (status_[static_cast<std::size_t>(i)] == 1) ++events;
        }
        if (events == 0) out.push_back({0, "no events", "no subject has status 1"});
        return out;
    }

    static std::string describe(const std::vector<Violation>& violations) {
        std::string s = "cohort validation failed:";
        std::size_t shown = 0;
        for (const auto& v : violations) {
            s += "\n  row " + std::to_string(v.row) + ": " + v.rule + " (" + v.message + ")";
            if (++shown == 8 && violations.size() > 8) {
                s += "\n  ... " + std::to_string(violations.size() - 8) + " more";
                break;
            }
        }
        return s;
    }

    Eigen::VectorXd trunc_, obs_;
    std::vector<int> status_;
    Eigen::MatrixXd surrogate_;
    std::optional<Eigen::MatrixXd> truth_;
};

}  // namespace lbsimex
