#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>

#include "lbsimex/link.hpp"
#include "lbsimex/rng.hpp"

using namespace lbsimex;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("ph link closed forms", "[link]") {
    const auto link = TransformationLink::ph();
    REQUIRE_THAT(link.cum_hazard(0.0), WithinAbs(1.0, 1e-15));
    REQUIRE_THAT(link.hazard(1.0), WithinRel(std::exp(1.0), 1e-15));
    REQUIRE_THAT(link.hazard_deriv(0.0), WithinAbs(1.0, 1e-15));
}

TEST_CASE("po link closed forms", "[link]") {
    const auto link = TransformationLink::po();
    REQUIRE_THAT(link.cum_hazard(0.0), WithinRel(std::log(2.0), 1e-14));
    REQUIRE_THAT(link.hazard(0.0), WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(link.hazard_deriv(0.0), WithinAbs(0.25, 1e-15));
}

TEST_CASE("po tail behaviour", "[link]") {
    const auto link = TransformationLink::po();
    // log(1 + u) ~ u for small u
    REQUIRE_THAT(link.cum_hazard(-40.0), WithinRel(std::exp(-40.0), 1e-12));
    REQUIRE_THAT(link.hazard(50.0), WithinAbs(1.0, 1e-12));
    // softplus approaches the identity from above
    REQUIRE_THAT(link.cum_hazard(40.0), WithinAbs(40.0, 1e-12));
}

TEST_CASE("links survive extreme arguments", "[link]") {
    const auto ph = TransformationLink::ph();
    const auto po = TransformationLink::po();
    REQUIRE(std::isfinite(ph.cum_hazard(800.0)));  // saturates, never infinite
    REQUIRE(std::isfinite(po.cum_hazard(800.0)));
    REQUIRE(po.cum_hazard(-800.0) >= 0.0);
    REQUIRE(po.hazard(-800.0) >= 0.0);
}

TEST_CASE("non-finite arguments are rejected", "[link]") {
    const auto link = TransformationLink::ph();
    REQUIRE_THROWS_AS(link.cum_hazard(std::nan("")), std::invalid_argument);
    REQUIRE_THROWS_AS(link.hazard(INFINITY), std::invalid_argument);
    REQUIRE_THROWS_AS(link.hazard_deriv(-INFINITY), std::invalid_argument);
}

TEST_CASE("hazard is the derivative of the cumulative hazard", "[link]") {
    const double h = 1e-5;
    for (const auto& link : {TransformationLink::ph(), TransformationLink::po()}) {
        for (int i = 0; i < 1000; ++i) {
            const double x = -30.0 + 60.0 * i / 999.0;
            const double fd = (link.cum_hazard(x + h) - link.cum_hazard(x - h)) / (2 * h);
            REQUIRE_THAT(fd, WithinAbs(link.hazard(x), 1e-6 * (1.0 + link.hazard(x))));
        }
    }
}

TEST_CASE("hazard derivative matches finite differences", "[link]") {
    const double h = 1e-5;
    for (const auto& link : {TransformationLink::ph(), TransformationLink::po()}) {
        for (const double x : {-3.0, -1.0, 0.0, 1.5, 3.0}) {
            const double fd = (link.hazard(x + h) - link.hazard(x - h)) / (2 * h);
            REQUIRE_THAT(fd, WithinAbs(link.hazard_deriv(x), 1e-7));
        }
    }
}

TEST_CASE("cumulative hazards are monotone", "[link]") {
    Rng rng(StreamKey::root(11));
    for (const auto& link : {TransformationLink::ph(), TransformationLink::po()}) {
        for (int i = 0; i < 2000; ++i) {
            double x = rng.uniform(-600.0, 600.0);
            double y = rng.uniform(-600.0, 600.0);
            if (x > y) std::swap(x, y);
            REQUIRE(link.cum_hazard(x) <= link.cum_hazard(y));
        }
    }
}

TEST_CASE("custom link triple is honoured", "[link]") {
    const auto link = TransformationLink::custom(
        [](double x) { return x * x; }, [](double x) { return 2 * x; },
        [](double) { return 2.0; });
    REQUIRE(link.kind() == LinkKind::custom);
    REQUIRE_THAT(link.cum_hazard(3.0), WithinAbs(9.0, 1e-15));
    REQUIRE_THAT(link.hazard(3.0), WithinAbs(6.0, 1e-15));
    REQUIRE_THAT(link.hazard_deriv(3.0), WithinAbs(2.0, 1e-15));
}
