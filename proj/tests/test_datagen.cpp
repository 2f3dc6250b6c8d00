#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "lbsimex/datagen.hpp"
#include "lbsimex/rng.hpp"

using namespace lbsimex;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("zero measurement error keeps W equal to X", "[datagen]") {
    SimScenario scenario;
    scenario.sigma_eta = 0.0;
    scenario.n = 100;
    Rng rng(StreamKey::root(1).child(stream_tag::datagen));
    const auto cohort = draw_prevalent_cohort(scenario, 20.0, rng);
    REQUIRE(cohort.surrogate() == cohort.truth());
}

TEST_CASE("accepted subjects satisfy the sampling constraints", "[datagen]") {
    SimScenario scenario;
    scenario.n = 400;
    Rng rng(StreamKey::root(2).child(stream_tag::datagen));
    const auto cohort = draw_prevalent_cohort(scenario, 20.0, rng);
    REQUIRE(cohort.n() == 400);
    for (Eigen::Index i = 0; i < cohort.n(); ++i) {
        REQUIRE(cohort.trunc_time(i) >= 0.0);
        REQUIRE(cohort.trunc_time(i) <= 1.0);  // uniform truncation window
        REQUIRE(cohort.trunc_time(i) <= cohort.obs_time(i));
        REQUIRE((cohort.status(i) == 0 || cohort.status(i) == 1));
    }
    REQUIRE(cohort.num_events() > 0);
}

TEST_CASE("generation is deterministic in the seed", "[datagen]") {
    SimScenario scenario;
    scenario.n = 50;
    Rng r1(StreamKey::root(3).child(stream_tag::datagen));
    Rng r2(StreamKey::root(3).child(stream_tag::datagen));
    const auto c1 = draw_prevalent_cohort(scenario, 15.0, r1);
    const auto c2 = draw_prevalent_cohort(scenario, 15.0, r2);
    REQUIRE(c1.obs_times() == c2.obs_times());
    REQUIRE(c1.surrogate() == c2.surrogate());
    REQUIRE(c1.truth() == c2.truth());
}

TEST_CASE("measurement error moments", "[datagen]") {
    Rng rng(StreamKey::root(4));
    const int n = 100000;
    Eigen::MatrixXd chol(2, 2);
    chol << 2.0, 0.0, 0.35, std::sqrt(3.0 - 0.35 * 0.35);
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
        Eigen::Vector2d z(rng.normal(), rng.normal());
        x.row(i) = (chol * z).transpose();
    }
    Eigen::MatrixXd sigma_eta(2, 2);
    sigma_eta << 0.5, 0.1, 0.1, 0.3;
    const auto w = add_measurement_error(x, sigma_eta, rng);

    const Eigen::MatrixXd diff = w - x;
    const Eigen::MatrixXd centered = diff.rowwise() - diff.colwise().mean();
    const Eigen::MatrixXd cov_eta = centered.transpose() * centered / (n - 1);
    for (Eigen::Index r = 0; r < 2; ++r)
        for (Eigen::Index c = 0; c < 2; ++c)
            REQUIRE_THAT(cov_eta(r, c), WithinAbs(sigma_eta(r, c),
                                                  0.05 * std::abs(sigma_eta(r, c)) + 0.01));

    // independent additive noise: cov(W) = cov(X) + Sigma_eta
    const Eigen::MatrixXd cx = chol * chol.transpose();
    const Eigen::MatrixXd wc = w.rowwise() - w.colwise().mean();
    const Eigen::MatrixXd cov_w = wc.transpose() * wc / (n - 1);
    for (Eigen::Index r = 0; r < 2; ++r)
        for (Eigen::Index c = 0; c < 2; ++c)
            REQUIRE_THAT(cov_w(r, c),
                         WithinAbs(cx(r, c) + sigma_eta(r, c),
                                   0.05 * std::abs(cx(r, c) + sigma_eta(r, c)) + 0.02));
}

TEST_CASE("zero covariance adds nothing", "[datagen]") {
    Rng rng(StreamKey::root(5));
    Eigen::MatrixXd x(10, 2);
    x.setRandom();
    REQUIRE(add_measurement_error(x, Eigen::MatrixXd::Zero(2, 2), rng) == x);
}

TEST_CASE("sampling is length-biased", "[datagen]") {
    // accepted failure times stochastically dominate the unconditional law
    SimScenario scenario;
    scenario.n = 20000;
    Rng rng(StreamKey::root(6).child(stream_tag::datagen));
    const Eigen::MatrixXd chol = psd_cholesky(scenario.cov_x);
    std::uint64_t rejections = 0;
    double sum_accepted = 0.0, sum_sq_a = 0.0;
    double sum_uncond = 0.0, sum_sq_u = 0.0;
    const int n = scenario.n;
    for (int i = 0; i < n; ++i) {
        const auto s = detail::draw_accepted(scenario, chol, rng, rejections);
        const double t_cap = std::min(s.fail, 50.0);  // tame the heavy tail
        sum_accepted += t_cap;
        sum_sq_a += t_cap * t_cap;
    }
    for (int i = 0; i < n; ++i) {
        Eigen::Vector2d z(rng.normal(), rng.normal());
        const Eigen::Vector2d x = chol * z;
        const double eps = detail::draw_extreme_value(rng);
        const double t = std::exp(-x.dot(scenario.beta0) + eps);
        const double t_cap = std::min(t, 50.0);
        sum_uncond += t_cap;
        sum_sq_u += t_cap * t_cap;
    }
    const double mean_a = sum_accepted / n, mean_u = sum_uncond / n;
    const double var_a = sum_sq_a / n - mean_a * mean_a;
    const double var_u = sum_sq_u / n - mean_u * mean_u;
    const double se = std::sqrt(var_a / n + var_u / n);
    REQUIRE(mean_a - mean_u > 5.0 * se);
}

TEST_CASE("truncation times are uniform given long survival", "[datagen]") {
    // for subjects with T >= 1 the entry delay is exactly U(0, 1)
    SimScenario scenario;
    scenario.n = 4000;
    Rng rng(StreamKey::root(7).child(stream_tag::datagen));
    const Eigen::MatrixXd chol = psd_cholesky(scenario.cov_x);
    std::uint64_t rejections = 0;
    std::vector<double> entries;
    while (entries.size() < 4000) {
        const auto s = detail::draw_accepted(scenario, chol, rng, rejections);
        if (s.fail >= 1.0) entries.push_back(s.trunc);
    }
    std::sort(entries.begin(), entries.end());
    double d = 0.0;
    const double n = static_cast<double>(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const double f = entries[i];
        d = std::max(d, std::abs((i + 1) / n - f));
        d = std::max(d, std::abs(f - i / n));
    }
    REQUIRE(d < 1.94947 / std::sqrt(n));  // 0.001-level critical value
}

TEST_CASE("censoring calibration hits the target", "[datagen]") {
    SimScenario scenario;
    const auto key = StreamKey::root(8);
    const double c25 = calibrate_censoring(scenario, 0.25, key, 30000);
    const double c50 = calibrate_censoring(scenario, 0.50, key, 30000);
    REQUIRE(c50 < c25);  // heavier censoring needs a smaller bound

    // fresh sample check
    scenario.n = 30000;
    Rng rng(StreamKey::root(9).child(stream_tag::datagen));
    const auto cohort = draw_prevalent_cohort(scenario, c25, rng);
    double censored = 0.0;
    for (Eigen::Index i = 0; i < cohort.n(); ++i) censored += cohort.status(i) == 0;
    REQUIRE_THAT(censored / static_cast<double>(cohort.n()), WithinAbs(0.25, 0.015));
}

TEST_CASE("censoring rate decreases in the bound", "[datagen]") {
    SimScenario scenario;
    scenario.n = 20000;
    double previous = 1.0;
    for (const double c : {2.0, 8.0, 32.0}) {
        Rng rng(StreamKey::root(10).child(stream_tag::datagen));
        const auto cohort = draw_prevalent_cohort(scenario, c, rng);
        double censored = 0.0;
        for (Eigen::Index i = 0; i < cohort.n(); ++i) censored += cohort.status(i) == 0;
        const double rate = censored / static_cast<double>(cohort.n());
        REQUIRE(rate < previous);
        previous = rate;
    }
}

TEST_CASE("scenario validation", "[datagen]") {
    SimScenario scenario;
    scenario.target_censoring = 1.5;
    REQUIRE_THROWS_AS(scenario.validate(), std::invalid_argument);
    SimScenario bad_n;
    bad_n.n = 0;
    REQUIRE_THROWS_AS(bad_n.validate(), std::invalid_argument);
    SimScenario ok;
    Rng rng(StreamKey::root(11));
    REQUIRE_THROWS_AS(draw_prevalent_cohort(ok, -1.0, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(calibrate_censoring(ok, 0.99, StreamKey::root(12)),
                      std::invalid_argument);
}

TEST_CASE("po generation works end to end", "[datagen]") {
    SimScenario scenario;
    scenario.link = LinkKind::po;
    scenario.n = 200;
    Rng rng(StreamKey::root(13).child(stream_tag::datagen));
    const auto cohort = draw_prevalent_cohort(scenario, 60.0, rng);
    REQUIRE(cohort.n() == 200);
    REQUIRE(cohort.num_events() > 0);
}
