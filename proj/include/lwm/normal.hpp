#pragma once

#include <cstddef>
#include <span>

namespace lwm {

// Standard normal CDF, computed as erfc(-x / sqrt(2)) / 2. Absolute error
// is that of std::erfc, far below 1e-7 everywhere.
double normal_cdf(double x);

// Inverse standard normal CDF for p in (0, 1), algorithm AS 241 (Wichura,
// PPND16): rational minimax approximations on three regimes, relative
// error below 1e-15. Throws OutOfRange for p outside (0, 1).
double inverse_normal_cdf(double p);

struct KsResult {
    double statistic; // sup-norm distance D_n between ECDF and Phi
    double p_value;   // asymptotic Kolmogorov tail (Marsaglia/NR form)
};

// One-sample Kolmogorov-Smirnov test against N(0,1). The p-value uses the
// series Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2) with the
// (sqrt(n) + 0.12 + 0.11/sqrt(n)) small-sample correction; accurate to a
// few parts in 1e3 for n >= 100. Input need not be sorted.
KsResult ks_test_standard_normal(std::span<const double> values);

} // namespace lwm
