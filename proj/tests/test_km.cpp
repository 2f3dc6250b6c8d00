#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lbsimex/cohort.hpp"
#include "lbsimex/km.hpp"
#include "lbsimex/rng.hpp"

using namespace lbsimex;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Exact-rational product-limit oracle: direct product of (1 - d_j / n_j)
// over sorted distinct times, kept as an integer fraction.
struct Fraction {
    std::int64_t num = 1, den = 1;
    void times(std::int64_t n, std::int64_t d) {
        num *= n;
        den *= d;
        const auto g = std::gcd(num, den);
        num /= g;
        den /= g;
    }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

std::vector<std::pair<double, Fraction>> oracle_product_limit(std::vector<double> times,
                                                              std::vector<int> events) {
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    std::vector<std::pair<double, Fraction>> out;
    Fraction surv;
    std::size_t i = 0;
    while (i < times.size()) {
        const double t = times[order[i]];
        std::size_t j = i;
        std::int64_t d = 0;
        while (j < times.size() && times[order[j]] == t) {
            if (events[order[j]] == 1) ++d;
            ++j;
        }
        const auto at_risk = static_cast<std::int64_t>(times.size() - i);
        if (d > 0) {
            surv.times(at_risk - d, at_risk);
            out.emplace_back(t, surv);
        }
        i = j;
    }
    return out;
}

Cohort residual_cohort(const std::vector<double>& v, const std::vector<int>& status) {
    // subjects entering at 0 so residual times equal observed times
    Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v.size()));
    Eigen::VectorXd y(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) y[static_cast<Eigen::Index>(i)] = v[i];
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(v.size()), 1);
    return Cohort::from_columns(a, y, status, w);
}

}  // namespace

TEST_CASE("golden product-limit fixtures", "[km]") {
    SECTION("all censoring events") {
        // hand product-limit over risk sets {3,2,1}
        const auto s = km_product_limit({1, 2, 3}, {1, 1, 1});
        REQUIRE(s.jump_times() == std::vector<double>{1, 2, 3});
        REQUIRE_THAT(s.value(1.0), WithinRel(2.0 / 3.0, 1e-15));
        REQUIRE_THAT(s.value(2.5), WithinRel(1.0 / 3.0, 1e-15));
        REQUIRE_THAT(s.value(3.0), WithinAbs(0.0, 0.0));
        REQUIRE_THAT(s.value(99.0), WithinAbs(0.0, 0.0));
        REQUIRE(s.value(0.999) == 1.0);
    }
    SECTION("no events at all") {
        const auto s = km_product_limit({1, 2, 3}, {0, 0, 0});
        REQUIRE(s.jump_times().empty());
        REQUIRE(s.value(2.9) == 1.0);
    }
    SECTION("alternating pattern, risk sets {4,3,2,1}") {
        const auto s = km_product_limit({1, 2, 3, 4}, {1, 0, 1, 0});
        REQUIRE(s.jump_times() == std::vector<double>{1, 3});
        REQUIRE_THAT(s.value(1.0), WithinRel(3.0 / 4.0, 1e-15));
        REQUIRE_THAT(s.value(3.5), WithinRel(3.0 / 8.0, 1e-15));
        // last observation removes without an event: curve held constant
        REQUIRE_THAT(s.value(100.0), WithinRel(3.0 / 8.0, 1e-15));
    }
}

TEST_CASE("product-limit matches the exact-rational oracle exhaustively", "[km]") {
    // all samples of size <= 6 with times in {1..4} and every event pattern
    for (int n = 1; n <= 6; ++n) {
        const int time_combos = 1 << (2 * n);  // 4^n
        for (int tc = 0; tc < time_combos; ++tc) {
            std::vector<double> times(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) times[static_cast<std::size_t>(i)] = 1 + ((tc >> (2 * i)) & 3);
            for (int pat = 0; pat < (1 << n); ++pat) {
                std::vector<int> events(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i) events[static_cast<std::size_t>(i)] = (pat >> i) & 1;
                const auto fit = km_product_limit(times, events);
                const auto exact = oracle_product_limit(times, events);
                REQUIRE(fit.jump_times().size() == exact.size());
                for (std::size_t k = 0; k < exact.size(); ++k) {
                    REQUIRE(fit.jump_times()[k] == exact[k].first);
                    REQUIRE_THAT(fit.values()[k],
                                 WithinAbs(exact[k].second.value(), 1e-15));
                }
            }
        }
    }
}

TEST_CASE("censoring survivor works on the residual scale", "[km]") {
    // V = Y - A with the censoring indicator 1 - delta as the event
    Eigen::VectorXd a(3), y(3);
    a << 1.0, 2.0, 0.5;
    y << 2.0, 4.0, 3.5;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 1);
    const auto cohort = Cohort::from_columns(a, y, {0, 0, 1}, w);
    const auto s = km_censoring_survivor(cohort);
    // residual times (1, 2, 3), censoring events (1, 1, 0)
    REQUIRE(s.jump_times() == std::vector<double>{1, 2});
    REQUIRE_THAT(s.value(1.0), WithinRel(2.0 / 3.0, 1e-15));
    REQUIRE_THAT(s.value(2.0), WithinRel(1.0 / 3.0, 1e-15));
}

TEST_CASE("zero residual times are tolerated for censored subjects", "[km]") {
    // a censored subject leaving at entry joins the risk set at V = 0 only
    Eigen::VectorXd a(3), y(3);
    a << 1.0, 0.5, 0.0;
    y << 1.0, 2.0, 3.0;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 1);
    const auto cohort = Cohort::from_columns(a, y, {0, 0, 1}, w);
    const auto s = km_censoring_survivor(cohort);
    // residual times (0, 1.5, 3): the V = 0 censoring is not a jump, the
    // V = 1.5 censoring divides a risk set of two
    REQUIRE(s.jump_times() == std::vector<double>{1.5});
    REQUIRE_THAT(s.value(1.5), WithinRel(0.5, 1e-15));
}

TEST_CASE("integrated survivor", "[km]") {
    SECTION("unit survivor integrates to t") {
        const StepSurvivor s({}, {});
        REQUIRE_THAT(w_integral(s, 2.5), WithinAbs(2.5, 1e-15));
        REQUIRE(w_integral(s, 0.0) == 0.0);
    }
    SECTION("rectangle sum over the first golden fixture") {
        const auto s = km_product_limit({1, 2, 3}, {1, 1, 1});
        REQUIRE_THAT(w_integral(s, 2.0), WithinRel(1.0 + 2.0 / 3.0, 1e-15));
        REQUIRE(w_integral(s, 0.0) == 0.0);
    }
    SECTION("negative argument is rejected") {
        const StepSurvivor s({}, {});
        REQUIRE_THROWS_AS(w_integral(s, -0.1), std::invalid_argument);
    }
}

TEST_CASE("length-bias weight", "[km]") {
    const StepSurvivor unit({}, {});
    SECTION("censored subjects carry zero weight") {
        REQUIRE(weight_r(unit, 1.7, 2.0, 0, 0.5) == 0.0);
    }
    SECTION("equal numerator and denominator times give one") {
        const auto s = km_product_limit({1, 2, 3}, {1, 0, 1});
        REQUIRE_THAT(weight_r(s, 3.0, 3.0, 1, 0.0), WithinAbs(1.0, 1e-15));
    }
    SECTION("unit survivor reduces to the time ratio") {
        // w(t) = t, so the weight is (t - A) / (Y - A)
        REQUIRE_THAT(weight_r(unit, 1.7, 2.0, 1, 0.5), WithinRel(1.2 / 1.5, 1e-15));
    }
    SECTION("vanishing denominator is an error") {
        // residual time zero makes the integrated survivor vanish
        REQUIRE_THROWS_AS(weight_r(unit, 1.0, 1.0, 1, 1.0), NumericError);
    }
}

TEST_CASE("survivor and integral properties on random cohorts", "[km]") {
    Rng rng(StreamKey::root(77));
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 40);
        std::vector<double> v(static_cast<std::size_t>(n));
        std::vector<int> e(static_cast<std::size_t>(n));
        for (auto& x : v) x = rng.uniform(0.05, 5.0);
        bool any = false;
        for (auto& x : e) {
            x = static_cast<int>(rng.next_u64() & 1);
            any = any || (x == 1);
        }
        if (!any) e[0] = 1;
        const auto s = km_product_limit(v, e);
        REQUIRE(s.value(0.0) == 1.0);
        double prev_val = 1.0, prev_int = 0.0;
        for (double t = 0.0; t <= 6.0; t += 0.11) {
            const double val = s.value(t);
            REQUIRE(val >= 0.0);
            REQUIRE(val <= prev_val);
            const double wt = s.integral(t);
            REQUIRE(wt >= prev_int);
            REQUIRE(wt - prev_int <= 0.11 + 1e-12);  // 1-Lipschitz
            prev_val = val;
            prev_int = wt;
        }
    }
}

TEST_CASE("no censoring keeps the weight increasing along follow-up", "[km]") {
    Eigen::VectorXd a(4), y(4);
    a << 0.2, 0.0, 0.5, 0.1;
    y << 1.0, 2.0, 3.0, 4.0;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 1);
    const auto cohort = Cohort::from_columns(a, y, {1, 1, 1, 1}, w);
    const auto s = km_censoring_survivor(cohort);
    REQUIRE(s.jump_times().empty());  // survivor identically one
    double prev = -1.0;
    for (double t = 0.2; t <= 1.0; t += 0.05) {
        const double r = weight_r(s, t, 1.0, 1, 0.2);
        REQUIRE(r >= prev);
        prev = r;
    }
}
