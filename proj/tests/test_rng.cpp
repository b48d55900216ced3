#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vci/rng.hpp"

using namespace vci;

TEST_CASE("identical (seed, counter) gives identical draws") {
    RngStream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.gaussian() == b.gaussian());

    // resuming mid-stream reproduces the tail
    RngStream c(42);
    for (int i = 0; i < 37; ++i) c.gaussian();
    RngStream d(42, 37);
    for (int i = 0; i < 10; ++i) CHECK(c.gaussian() == d.gaussian());
}

TEST_CASE("different seeds decorrelate") {
    RngStream a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 1000; ++i)
        if (a.gaussian() == b.gaussian()) ++equal;
    CHECK(equal == 0);
}

TEST_CASE("gaussian moments are sane") {
    RngStream rng(7);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0, sum3 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.gaussian();
        sum += z;
        sum2 += z * z;
        sum3 += z * z * z;
    }
    CHECK(std::fabs(sum / n) < 0.01);
    CHECK(std::fabs(sum2 / n - 1.0) < 0.02);
    CHECK(std::fabs(sum3 / n) < 0.05);
}

TEST_CASE("uniform stays in range and counter ticks once per draw") {
    RngStream rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(rng.counter() == 1000);
    rng.gaussian();
    CHECK(rng.counter() == 1001);
}

TEST_CASE("categorical respects weights under a fixed stream") {
    RngStream rng(11);
    const Vec p{0.25, 0.5, 0.25};
    std::vector<int> counts(3, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(p)];
    CHECK(std::fabs(counts[0] / double(n) - 0.25) < 0.01);
    CHECK(std::fabs(counts[1] / double(n) - 0.50) < 0.01);
    CHECK(std::fabs(counts[2] / double(n) - 0.25) < 0.01);
}

TEST_CASE("derive_seed separates streams") {
    const std::uint64_t a = RngStream::derive_seed(5, 0);
    const std::uint64_t b = RngStream::derive_seed(5, 1);
    const std::uint64_t c = RngStream::derive_seed(6, 0);
    CHECK(a != b);
    CHECK(a != c);
    CHECK(RngStream::derive_seed(5, 0) == a);
}
