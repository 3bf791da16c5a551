#include <cmath>

#include <doctest.h>

#include "p2f/errors.hpp"
#include "p2f/rng.hpp"
#include "p2f/special.hpp"

namespace sp = p2f::special;

TEST_CASE("lgamma matches the library implementation across (0.5, 1e6)") {
    // Absolute tolerance tightens to 1e-10 for moderate arguments; for large
    // x the double ulp of the result itself exceeds that, so the bound is
    // relative there.
    p2f::SplitMix64 rng(7);
    for (int i = 0; i < 20000; ++i) {
        const double x = std::exp(rng.next_uniform(std::log(0.5), std::log(1e6)));
        const double ours = sp::lgamma(x);
        const double ref = std::lgamma(x);
        const double tol = std::max(1e-10, 1e-14 * std::abs(ref));
        CHECK(std::abs(ours - ref) < tol);
    }
}

TEST_CASE("lgamma fixed points") {
    CHECK(sp::lgamma(1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sp::lgamma(2.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sp::lgamma(0.5) == doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-12));
    CHECK(sp::lgamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-12));
}

TEST_CASE("lgamma rejects the nonpositive domain") {
    CHECK_THROWS_AS(sp::lgamma(0.0), p2f::DomainError);
    CHECK_THROWS_AS(sp::lgamma(-3.2), p2f::DomainError);
}

TEST_CASE("digamma satisfies the recurrence and known values") {
    constexpr double kEulerGamma = 0.5772156649015328606;
    // the series truncation leaves ~1e-11 absolute error near the poles
    CHECK(sp::digamma(1.0) == doctest::Approx(-kEulerGamma).epsilon(1e-10));
    CHECK(sp::digamma(0.5) == doctest::Approx(-kEulerGamma - 2.0 * std::log(2.0)).epsilon(1e-10));
    p2f::SplitMix64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const double x = rng.next_uniform(0.1, 50.0);
        CHECK(sp::digamma(x + 1.0) - sp::digamma(x) == doctest::Approx(1.0 / x).epsilon(1e-10));
    }
}

TEST_CASE("digamma is the derivative of lgamma") {
    p2f::SplitMix64 rng(13);
    for (int i = 0; i < 500; ++i) {
        const double x = rng.next_uniform(0.5, 100.0);
        const double h = 1e-6 * std::max(1.0, x);
        const double fd = (sp::lgamma(x + h) - sp::lgamma(x - h)) / (2.0 * h);
        CHECK(sp::digamma(x) == doctest::Approx(fd).epsilon(1e-6));
    }
}
