#include <cmath>
#include <set>

#include <doctest.h>

#include "p2f/rng.hpp"

TEST_CASE("streams replay bit-identically") {
    p2f::SplitMix64 a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("doubles stay inside their ranges") {
    p2f::SplitMix64 rng(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = rng.next_uniform(-2.0, 3.0);
        CHECK(v >= -2.0);
        CHECK(v < 3.0);
        CHECK(rng.next_below(7) < 7);
    }
}

TEST_CASE("derive_key separates substreams") {
    std::set<std::uint64_t> keys;
    for (std::uint64_t a = 0; a < 10; ++a) {
        for (std::uint64_t b = 0; b < 10; ++b) {
            for (std::uint64_t c = 0; c < 4; ++c) keys.insert(p2f::derive_key(42, a, b, c));
        }
    }
    CHECK(keys.size() == 400);
    CHECK(p2f::derive_key(1, 2, 3, 4) != p2f::derive_key(2, 2, 3, 4));
}

TEST_CASE("gaussian draws have roughly unit variance") {
    p2f::SplitMix64 rng(17);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.next_gaussian();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
}
