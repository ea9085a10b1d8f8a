#pragma once

// Standard normal density, distribution function and quantiles.

#include <cmath>
#include <numbers>

#include "slope/errors.hpp"

namespace slope {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Φ(x).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// 1 − Φ(x), accurate in the upper tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace detail {

// Lower-tail quantile for 0 < p <= 0.5 (result <= 0). Acklam's rational
// approximation (relative error ~1e-9) followed by two Halley steps against
// the erfc-based Φ, which is accurate for negative arguments.
inline double lower_quantile(double p) {
  constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                          -2.759285104469687e+02, 1.383577518672690e+02,
                          -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                          -1.556989798598866e+02, 6.680131188771972e+01,
                          -1.328068155288572e+01};
  constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                          -2.400758277161838e+00, -2.549732539343734e+00,
                          4.374664141464968e+00, 2.938163982698783e+00};
  constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                          2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int step = 0; step < 2; ++step) {
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace detail

/// Φ^{-1}(u) for u in (0, 1).
inline double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("normal_quantile: argument must lie in (0, 1)");
  }
  if (u <= 0.5) return detail::lower_quantile(u);
  return -detail::lower_quantile(1.0 - u);
}

/// Φ^{-1}(1 − alpha), computed without forming 1 − alpha so small tail
/// probabilities keep full relative precision.
inline double normal_upper_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("normal_upper_quantile: tail probability must lie in (0, 1)");
  }
  if (alpha <= 0.5) return -detail::lower_quantile(alpha);
  return detail::lower_quantile(1.0 - alpha);
}

}  // namespace slope
