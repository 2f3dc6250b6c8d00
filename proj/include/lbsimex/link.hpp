#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace lbsimex {

enum class LinkKind { ph, po, custom };

// Error-term family of the transformation model, described by the
// cumulative hazard of the error, its hazard, and the hazard derivative.
//
//   ph: extreme-value error, cum_hazard(x) = exp(x)
//   po: logistic error,      cum_hazard(x) = log(1 + exp(x))
//
// A custom triple can be supplied for other error laws; the built-in
// pair is what the fitting routines are tuned for.
class TransformationLink {
public:
    using Fn = std::function<double(double)>;

    static TransformationLink ph() { return TransformationLink(LinkKind::ph); }
    static TransformationLink po() { return TransformationLink(LinkKind::po); }

    static TransformationLink custom(Fn cum_hazard, Fn hazard, Fn hazard_deriv) {
        TransformationLink link(LinkKind::custom);
        link.cum_ = std::move(cum_hazard);
        link.haz_ = std::move(hazard);
        link.haz_deriv_ = std::move(hazard_deriv);
        return link;
    }

    LinkKind kind() const noexcept { return kind_; }

    double cum_hazard(double x) const {
        check_finite(x);
        switch (kind_) {
            case LinkKind::ph:
                // exp saturates to the largest finite value above x = 709.
                return std::exp(std::min(x, 709.0));
            case LinkKind::po:
                return softplus(x);
            default:
                return cum_(x);
        }
    }

    double hazard(double x) const {
        check_finite(x);
        switch (kind_) {
            case LinkKind::ph:
                return std::exp(std::min(x, 709.0));
            case LinkKind::po:
                return logistic(x);
            default:
                return haz_(x);
        }
    }

    double hazard_deriv(double x) const {
        check_finite(x);
        switch (kind_) {
            case LinkKind::ph:
                return std::exp(std::min(x, 709.0));
            case LinkKind::po: {
                const double p = logistic(x);
                return p * (1.0 - p);
            }
            default:
                return haz_deriv_(x);
        }
    }

    static double softplus(double x) {
        if (x > 35.0) return x;
        if (x < -35.0) return std::exp(x);
        return std::log1p(std::exp(x));
    }

    static double logistic(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

private:
    explicit TransformationLink(LinkKind kind) : kind_(kind) {}

    static void check_finite(double x) {
        if (!std::isfinite(x))
            throw std::invalid_argument("link evaluated at non-finite argument");
    }

    LinkKind kind_;
    Fn cum_, haz_, haz_deriv_;
};

inline std::string to_string(LinkKind kind) {
    switch (kind) {
        case LinkKind::ph: return "ph";
        case LinkKind::po: return "po";
        default: return "custom";
    }
}

}  // namespace lbsimex
