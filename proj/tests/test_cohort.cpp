#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lbsimex/cohort.hpp"

using namespace lbsimex;

namespace {

SubjectRecord subject(double a, double y, int status, std::vector<double> w) {
    SubjectRecord s;
    s.trunc_time = a;
    s.obs_time = y;
    s.status = status;
    s.surrogate = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    return s;
}

bool has_rule(const ValidationError& e, const std::string& rule, std::size_t row) {
    for (const auto& v : e.violations())
        if (v.rule == rule && v.row == row) return true;
    return false;
}

}  // namespace

TEST_CASE("three valid subjects validate", "[cohort]") {
    const auto c = Cohort::validate(
        {subject(0.1, 1.0, 1, {0.5}), subject(0.0, 2.0, 0, {1.5}), subject(0.4, 0.9, 1, {-1.0})});
    REQUIRE(c.n() == 3);
    REQUIRE(c.dim() == 1);
    REQUIRE(c.num_events() == 2);
    REQUIRE_FALSE(c.has_truth());
}

TEST_CASE("truncation exceeding the observed time is rejected", "[cohort]") {
    try {
        Cohort::validate({subject(0.1, 1.0, 1, {0.0}), subject(2.0, 1.0, 0, {0.0})});
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        REQUIRE(has_rule(e, "truncation exceeds observed time", 1));
    }
}

TEST_CASE("a cohort with no events is rejected", "[cohort]") {
    try {
        Cohort::validate({subject(0.0, 1.0, 0, {0.0}), subject(0.0, 2.0, 0, {0.0})});
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        REQUIRE(has_rule(e, "no events", 0));
    }
}

TEST_CASE("each broken rule is reported distinctly", "[cohort]") {
    try {
        Cohort::validate({subject(-1.0, 1.0, 1, {0.0}),            // negative time
                          subject(0.0, 1.0, 2, {0.0}),             // bad status
                          subject(0.0, 1.0, 1, {std::nan("")}),    // non-finite covariate
                          subject(0.0, 1.0, 1, {0.0, 1.0}),        // wrong dimension
                          subject(0.5, 0.5, 1, {0.0})});           // event at entry
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        REQUIRE(has_rule(e, "negative time", 0));
        REQUIRE(has_rule(e, "status", 1));
        REQUIRE(has_rule(e, "non-finite covariate", 2));
        REQUIRE(has_rule(e, "dimension", 3));
        REQUIRE(has_rule(e, "event at entry", 4));
    }
}

TEST_CASE("column construction round-trips and resamples", "[cohort]") {
    Eigen::VectorXd a(3), y(3);
    a << 0.0, 0.2, 0.1;
    y << 1.0, 1.5, 2.0;
    Eigen::MatrixXd w(3, 2), x(3, 2);
    w << 1, 2, 3, 4, 5, 6;
    x << 0, 0, 1, 1, 2, 2;
    const auto c = Cohort::from_columns(a, y, {1, 0, 1}, w, x);
    REQUIRE(c.has_truth());
    const auto r = c.resample({2, 2, 0});
    REQUIRE(r.n() == 3);
    REQUIRE(r.obs_time(0) == 2.0);
    REQUIRE(r.truth()(0, 0) == 2.0);
    REQUIRE(r.surrogate()(2, 1) == 2.0);
    REQUIRE(r.num_events() == 3);
}

TEST_CASE("check reports instead of throwing", "[cohort]") {
    const auto violations = Cohort::check({subject(0.0, -1.0, 1, {0.0})});
    REQUIRE_FALSE(violations.empty());
}
