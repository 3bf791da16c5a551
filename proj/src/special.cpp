#include "p2f/special.hpp"

#include <cmath>

#include "p2f/errors.hpp"

namespace p2f::special {

namespace {

// Lanczos g = 7, n = 9 coefficient set.
constexpr double kLanczosG = 7.0;
constexpr double kLanczos[9] = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7,
};
constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // 0.5*ln(2*pi)
constexpr double kPi = 3.14159265358979323846;

double lgamma_core(double x) {
    // Valid for x >= 0.5.
    double acc = kLanczos[0];
    for (int i = 1; i < 9; ++i) {
        acc += kLanczos[i] / (x - 1.0 + static_cast<double>(i));
    }
    const double t = x + kLanczosG - 0.5;
    return kHalfLogTwoPi + (x - 0.5) * std::log(t) - t + std::log(acc);
}

}  // namespace

double lgamma(double x) {
    if (!(x > 0.0)) {
        throw DomainError("lgamma: argument must be positive, got " + std::to_string(x));
    }
    if (x < 0.5) {
        // Reflection; sin(pi*x) > 0 on (0, 1).
        return std::log(kPi / std::sin(kPi * x)) - lgamma_core(1.0 - x);
    }
    return lgamma_core(x);
}

double digamma(double x) {
    if (!(x > 0.0)) {
        throw DomainError("digamma: argument must be positive, got " + std::to_string(x));
    }
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    // Asymptotic series with Bernoulli terms through B_10; remainder < 1e-11 at x >= 6.
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = std::log(x) - 0.5 * inv;
    series -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
              inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    return acc + series;
}

}  // namespace p2f::special
