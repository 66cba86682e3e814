#pragma once

namespace qbvi::special {

// Both functions require x > 0 and throw DomainError otherwise. The argument is
// shifted by the upward recurrence until it is at least 10, then the asymptotic
// series is summed; absolute error is below 1e-12 on (0, inf).
double digamma(double x);
double trigamma(double x);

}  // namespace qbvi::special
