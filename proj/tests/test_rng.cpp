#include <catch2/catch_amalgamated.hpp>

#include "lbsimex/rng.hpp"

using namespace lbsimex;

TEST_CASE("identical keys give identical streams", "[rng]") {
    Rng a(StreamKey::root(42).child(7));
    Rng b(StreamKey::root(42).child(7));
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("child streams differ by tag and from the parent", "[rng]") {
    const auto root = StreamKey::root(1);
    Rng a(root.child(1)), b(root.child(2)), c(root);
    bool all_equal_ab = true, all_equal_ac = true;
    for (int i = 0; i < 16; ++i) {
        const auto x = a.next_u64();
        if (x != b.next_u64()) all_equal_ab = false;
        if (x != c.next_u64()) all_equal_ac = false;
    }
    REQUIRE_FALSE(all_equal_ab);
    REQUIRE_FALSE(all_equal_ac);
}

TEST_CASE("uniform draws stay inside the unit interval", "[rng]") {
    Rng rng(StreamKey::root(3));
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double v = rng.uniform_open();
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
    }
}

TEST_CASE("normal draws have roughly standard moments", "[rng]") {
    Rng rng(StreamKey::root(4));
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(0.0, 0.01));
    REQUIRE_THAT(var, Catch::Matchers::WithinAbs(1.0, 0.02));
}

TEST_CASE("matrix fill is deterministic", "[rng]") {
    Rng a(StreamKey::root(9).child(1)), b(StreamKey::root(9).child(1));
    const auto m1 = a.normal_matrix(13, 3);
    const auto m2 = b.normal_matrix(13, 3);
    REQUIRE(m1 == m2);
}
