#pragma once

namespace p2f::special {

// log Gamma(x) for x > 0, Lanczos approximation (g = 7, 9 coefficients).
// Throws DomainError for x <= 0.
double lgamma(double x);

// Digamma psi(x) for x > 0 via upward recurrence into the asymptotic range.
double digamma(double x);

}  // namespace p2f::special
