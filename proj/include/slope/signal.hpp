#pragma once

// Regression coefficients for simulations. With s = √(2 log p):
//
//   class 1, 2        N(0, σ²) on a random k-support, σ = 2s and 3s
//   class 3           1.2s on a random k-support
//   class 4, 5, 6     linear ranges [1.2s, 0.6s], [1.5s, 0.5s], [4.5s, 1.5s],
//                     randomly permuted over a random k-support
//   class 7           dense: a random permutation of v_i = 1.2s (i/k)^{-1.2}
//   fixed_amplitude   a on a random k-support
//   gaussian          N(0, sd²) on a random k-support

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "slope/errors.hpp"
#include "slope/rng.hpp"

namespace slope {

using Eigen::Index;
using Eigen::VectorXd;

enum class SignalKind { signal_class, fixed_amplitude, gaussian };

struct SignalSpec {
  SignalKind kind = SignalKind::fixed_amplitude;
  int class_id = 3;        ///< 1..7 for signal_class
  double amplitude = 1.0;  ///< value for fixed_amplitude, sd for gaussian
  Index k = 0;
  Index p = 0;
  std::uint64_t seed = 1;
};

inline double universal_threshold(Index p) { return std::sqrt(2.0 * std::log(static_cast<double>(p))); }

namespace detail {

inline std::vector<double> linear_range(double hi, double lo, Index k) {
  std::vector<double> v(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    v[static_cast<std::size_t>(i)] = k == 1 ? hi : hi + (lo - hi) * static_cast<double>(i) / static_cast<double>(k - 1);
  }
  return v;
}

}  // namespace detail

/// The coefficient vector for `spec`; `seed` overrides spec.seed.
inline VectorXd make_signal(const SignalSpec& spec, std::uint64_t seed) {
  const Index p = spec.p, k = spec.k;
  if (p < 1) throw DimensionError("make_signal: p must be positive");
  if (k < 0 || k > p) throw DimensionError("make_signal: k must lie in [0, p]");
  Rng rng(seed);
  const double s = universal_threshold(p);
  VectorXd beta = VectorXd::Zero(p);

  if (spec.kind == SignalKind::signal_class && spec.class_id == 7) {
    if (k < 1) throw DimensionError("make_signal: class 7 needs k >= 1");
    std::vector<double> v(static_cast<std::size_t>(p));
    for (Index i = 0; i < p; ++i) {
      v[static_cast<std::size_t>(i)] =
          1.2 * s * std::pow(static_cast<double>(i + 1) / static_cast<double>(k), -1.2);
    }
    rng.shuffle(v);
    for (Index i = 0; i < p; ++i) beta[i] = v[static_cast<std::size_t>(i)];
    return beta;
  }

  const std::vector<Index> support = rng.sample_without_replacement(p, k);
  std::vector<double> values(static_cast<std::size_t>(k));
  switch (spec.kind) {
    case SignalKind::fixed_amplitude:
      std::fill(values.begin(), values.end(), spec.amplitude);
      break;
    case SignalKind::gaussian:
      if (!(spec.amplitude > 0.0)) throw DomainError("make_signal: gaussian sd must be positive");
      for (double& x : values) x = spec.amplitude * rng.normal();
      break;
    case SignalKind::signal_class:
      switch (spec.class_id) {
        case 1:
        case 2: {
          const double sd = (spec.class_id == 1 ? 2.0 : 3.0) * s;
          for (double& x : values) x = sd * rng.normal();
          break;
        }
        case 3:
          std::fill(values.begin(), values.end(), 1.2 * s);
          break;
        case 4:
        case 5:
        case 6: {
          const double hi[] = {1.2, 1.5, 4.5};
          const double lo[] = {0.6, 0.5, 1.5};
          values = detail::linear_range(hi[spec.class_id - 4] * s, lo[spec.class_id - 4] * s, k);
          rng.shuffle(values);
          break;
        }
        default:
          throw ConfigError("make_signal: class_id must be 1..7, got " + std::to_string(spec.class_id));
      }
      break;
  }
  for (Index i = 0; i < k; ++i) beta[support[static_cast<std::size_t>(i)]] = values[static_cast<std::size_t>(i)];
  return beta;
}

inline VectorXd make_signal(const SignalSpec& spec) { return make_signal(spec, spec.seed); }

}  // namespace slope
