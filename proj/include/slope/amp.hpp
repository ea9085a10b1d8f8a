#pragma once

// Asymptotic lasso predictions from the state-evolution fixed point
//
//   τ² = 1 + (1/δ) E(η_{ατ}(Θ + τZ) − Θ)²
//   λ  = (1 − (1/δ) P(|Θ + τZ| > ατ)) ατ
//
// and the high signal-to-noise limit of the resulting FDR. η is soft
// thresholding, Z ~ N(0,1), δ = n/p. Everything below works in units of τ:
// with γ = Θ/τ the expectations depend on (α, γ) only.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "slope/errors.hpp"
#include "slope/format.hpp"
#include "slope/normal.hpp"
#include "slope/parallel.hpp"

namespace slope {

namespace detail {

// Bisection on a sign change of f over [lo, hi], run until the bracket stops
// shrinking in floating point. f(lo) and f(hi) must have opposite signs.
template <class F>
double bisect(F&& f, double lo, double hi, const char* who) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) throw NonconvergenceError(std::string(who) + ": root not bracketed");
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Smallest hi = start·2^j with pred(hi) true.
template <class Pred>
double expand_until(Pred&& pred, double start, const char* who) {
  double hi = start;
  for (int j = 0; j < 1100; ++j) {
    if (pred(hi)) return hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) break;
  }
  throw NonconvergenceError(std::string(who) + ": could not bracket a root");
}

// (1 + c²)Φ̄(c) − cφ(c) = E[(Z − c)_+²].
inline double upper_partial_second_moment(double c) {
  return (1.0 + c * c) * normal_sf(c) - c * normal_pdf(c);
}

}  // namespace detail

struct SoftThresholdMoments {
  double m2;    ///< E η_α(γ + Z)²
  double miss;  ///< E (η_α(γ + Z) − γ)²
};

/// Closed-form second moments of soft thresholding at α applied to γ + Z.
inline SoftThresholdMoments soft_threshold_moments(double alpha, double gamma) {
  if (!(alpha >= 0.0)) throw DomainError("soft_threshold_moments: alpha must be nonnegative");
  const double a = alpha, g = gamma;
  const double m2 = detail::upper_partial_second_moment(a - g) + detail::upper_partial_second_moment(a + g);
  const double miss = (1.0 + a * a) * normal_sf(a - g) - (a + g) * normal_pdf(a - g) +
                      (1.0 + a * a) * normal_sf(a + g) + (g - a) * normal_pdf(a + g) +
                      g * g * (normal_cdf(a - g) - normal_cdf(-a - g));
  return {m2, miss};
}

/// E η_α(Z)² = 2[(1 + α²)Φ(−α) − αφ(α)].
inline double null_soft_threshold_moment(double alpha) {
  return 2.0 * detail::upper_partial_second_moment(alpha);
}

/// Root of 2(1 + α²)Φ(−α) − 2αφ(α) = δ for δ < 1; zero for δ ≥ 1.
inline double alpha_min(double delta) {
  if (!(delta > 0.0)) throw DomainError("alpha_min: delta must be positive");
  if (delta >= 1.0) return 0.0;
  const auto f = [delta](double a) { return null_soft_threshold_moment(a) - delta; };
  const double hi = detail::expand_until([&](double a) { return f(a) < 0.0; }, 1.0, "alpha_min");
  return detail::bisect(f, 0.0, hi, "alpha_min");
}

// ---------------------------------------------------------------------------
// State evolution for a two-point or Gaussian-mixture prior.

struct PriorSpec {
  enum class Kind { point_mass, gaussian_mixture };
  Kind kind = Kind::point_mass;
  double epsilon = 0.1;    ///< P(Θ ≠ 0)
  double amplitude = 1.0;  ///< M for point_mass, sd for gaussian_mixture

  static PriorSpec point_mass(double epsilon, double M) { return {Kind::point_mass, epsilon, M}; }
  static PriorSpec gaussian_mixture(double epsilon, double sd) { return {Kind::gaussian_mixture, epsilon, sd}; }
};

enum class AmpRegime { finite, full_power, limited_power };

inline const char* to_string(AmpRegime r) {
  switch (r) {
    case AmpRegime::finite: return "finite";
    case AmpRegime::full_power: return "full_power";
    case AmpRegime::limited_power: return "limited_power";
  }
  return "unknown";
}

struct AmpFixedPoint {
  double alpha = 0.0;
  double tau = 0.0;
  double delta = 0.0;
  double lambda = 0.0;
  double fdp = 0.0;
  double power = 0.0;
  AmpRegime regime = AmpRegime::finite;
  double residual_tau = 0.0;     ///< |τ² − rhs| / τ²
  double residual_lambda = 0.0;  ///< |λ − rhs| / λ

  double max_residual() const { return std::max(residual_tau, residual_lambda); }
};

namespace detail {

struct PriorAverages {
  double miss;           ///< E(η_α(Θ/τ + Z) − Θ/τ)²
  double detect;         ///< P(|Θ/τ + Z| > α)
  double detect_signal;  ///< P(|Θ/τ + Z| > α | Θ ≠ 0)
};

inline PriorAverages prior_averages(const PriorSpec& prior, double alpha, double tau) {
  const double eps = prior.epsilon;
  const double null_detect = 2.0 * normal_sf(alpha);
  double miss_signal, detect_signal;
  if (prior.kind == PriorSpec::Kind::point_mass) {
    const double g = prior.amplitude / tau;
    miss_signal = soft_threshold_moments(alpha, g).miss;
    detect_signal = normal_sf(alpha - g) + normal_sf(alpha + g);
  } else {
    const double s = prior.amplitude / tau;
    detect_signal = 2.0 * normal_sf(alpha / std::sqrt(1.0 + s * s));
    const auto integrand = [&](double u) { return soft_threshold_moments(alpha, s * u).miss * normal_pdf(u); };
    miss_signal = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -10.0, 10.0, 15, 1e-13);
  }
  return {(1.0 - eps) * null_soft_threshold_moment(alpha) + eps * miss_signal,
          (1.0 - eps) * null_detect + eps * detect_signal, detect_signal};
}

inline void validate_prior(const PriorSpec& prior) {
  if (!(prior.epsilon > 0.0 && prior.epsilon <= 1.0)) {
    throw DomainError("PriorSpec: epsilon must lie in (0, 1] (the prior needs positive variance)");
  }
  if (prior.kind == PriorSpec::Kind::point_mass && prior.epsilon == 1.0) {
    throw DomainError("PriorSpec: point mass with epsilon = 1 has zero variance");
  }
  if (!(prior.amplitude > 0.0) || !std::isfinite(prior.amplitude)) {
    throw DomainError("PriorSpec: amplitude must be positive and finite");
  }
}

// τ² solving the first state-evolution equation at fixed α > α_min, or
// nullopt when no finite solution can be bracketed.
inline std::optional<double> tau_sq_for_alpha(const PriorSpec& prior, double delta, double alpha) {
  const auto h = [&](double t) { return 1.0 + t * prior_averages(prior, alpha, std::sqrt(t)).miss / delta - t; };
  double hi = 2.0;
  while (h(hi) >= 0.0) {
    hi *= 2.0;
    if (hi > 1e300) return std::nullopt;
  }
  return bisect(h, 1.0, hi, "state_evolution: tau");
}

}  // namespace detail

/// Unique (α, τ) with α > α_min(δ) solving both state-evolution equations for
/// the given λ, with the predicted FDP and power attached.
inline AmpFixedPoint state_evolution(const PriorSpec& prior, double delta, double lambda) {
  detail::validate_prior(prior);
  if (!(delta > 0.0)) throw DomainError("state_evolution: delta must be positive");
  if (!(lambda > 0.0)) throw DomainError("state_evolution: lambda must be positive");

  const double a_min = alpha_min(delta);
  const auto calibrated = [&](double alpha) {
    const auto t = detail::tau_sq_for_alpha(prior, delta, alpha);
    if (!t) return -std::numeric_limits<double>::infinity();
    const double tau = std::sqrt(*t);
    return (1.0 - detail::prior_averages(prior, alpha, tau).detect / delta) * alpha * tau;
  };

  const double lo = a_min + 1e-9 * std::max(1.0, a_min);
  if (!(calibrated(lo) < lambda)) {
    throw NonconvergenceError("state_evolution: lambda = " + format_real(lambda) +
                              " is below the calibration curve at alpha_min = " + format_real(a_min));
  }
  const double hi = detail::expand_until([&](double a) { return calibrated(a) > lambda; },
                                         std::max(1.0, 2.0 * a_min), "state_evolution: alpha");
  const double alpha = detail::bisect([&](double a) { return calibrated(a) - lambda; }, lo, hi,
                                      "state_evolution: alpha");

  AmpFixedPoint fp;
  fp.alpha = alpha;
  fp.tau = std::sqrt(*detail::tau_sq_for_alpha(prior, delta, alpha));
  fp.delta = delta;
  fp.lambda = lambda;
  const detail::PriorAverages avg = detail::prior_averages(prior, alpha, fp.tau);
  const double tau_sq = fp.tau * fp.tau;
  fp.residual_tau = std::abs(tau_sq - 1.0 - tau_sq * avg.miss / delta) / tau_sq;
  fp.residual_lambda = std::abs(lambda - (1.0 - avg.detect / delta) * alpha * fp.tau) / lambda;
  fp.fdp = (1.0 - prior.epsilon) * 2.0 * normal_sf(alpha) / avg.detect;
  fp.power = avg.detect_signal;
  if (fp.max_residual() > 1e-8) {
    throw NonconvergenceError("state_evolution: residual " + format_real(fp.max_residual()) + " above 1e-8");
  }
  return fp;
}

// ---------------------------------------------------------------------------
// High signal-to-noise limit.

namespace detail {

// G(α) = 2(1−ε)[(1+α²)Φ(−α) − αφ(α)] + ε(1+α²).
inline double full_power_lhs(double alpha, double eps) {
  return (1.0 - eps) * null_soft_threshold_moment(alpha) + eps * (1.0 + alpha * alpha);
}

// Minimizer of G: εα = 2(1−ε)(φ(α) − αΦ(−α)).
inline double full_power_critical_alpha(double eps) {
  const auto f = [eps](double a) { return eps * a - 2.0 * (1.0 - eps) * (normal_pdf(a) - a * normal_sf(a)); };
  const double hi = expand_until([&](double a) { return f(a) > 0.0; }, 1.0, "critical alpha");
  return bisect(f, 0.0, hi, "critical alpha");
}

inline double full_power_minimum(double eps) { return full_power_lhs(full_power_critical_alpha(eps), eps); }

// 2(1−ε)Φ(−α) + ε[Φ(−α−γ) + Φ(−α+γ)], the limiting R/p.
inline double limited_power_rate(double alpha, double gamma, double eps) {
  return 2.0 * (1.0 - eps) * normal_sf(alpha) + eps * (normal_sf(alpha + gamma) + normal_sf(alpha - gamma));
}

inline double limited_power_mse(double alpha, double gamma, double eps) {
  return (1.0 - eps) * null_soft_threshold_moment(alpha) + eps * soft_threshold_moments(alpha, gamma).miss;
}

}  // namespace detail

/// ε*(δ): the sparsity at which min_α G(α) = δ. Below it the high-SNR lasso
/// has full power.
inline double weak_threshold(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("weak_threshold: delta must lie in (0, 1)");
  // G is increasing in ε, so min_α G is too; it tends to 0 as ε → 0 and to 1 as ε → 1.
  return detail::bisect([delta](double e) { return detail::full_power_minimum(e) - delta; }, 1e-300,
                        1.0 - 1e-16, "weak_threshold");
}

struct HighSnrPrediction {
  double epsilon = 0.0;
  double delta = 0.0;
  AmpRegime regime = AmpRegime::full_power;
  double alpha_star = 0.0;
  std::optional<double> gamma_star;
  double q_star = 0.0;
  double power = 1.0;
  double residual = 0.0;  ///< largest absolute residual of the defining equations
};

/// Limiting lasso FDR q*(ε, δ) when signals and λ grow without bound.
inline HighSnrPrediction high_snr_fdr(double epsilon, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("high_snr_fdr: epsilon must lie in (0, 1)");
  if (!(delta > 0.0)) throw DomainError("high_snr_fdr: delta must be positive");
  const double eps = epsilon;
  HighSnrPrediction out;
  out.epsilon = eps;
  out.delta = delta;

  const double a_crit = detail::full_power_critical_alpha(eps);
  const bool full = delta >= 1.0 || detail::full_power_lhs(a_crit, eps) <= delta;
  if (full) {
    // Of the (up to two) roots of G = δ take the largest: it lies beyond the
    // minimizer of G, where the limiting R/p = ε + 2(1−ε)Φ(−α) stays below δ.
    const auto f = [&](double a) { return detail::full_power_lhs(a, eps) - delta; };
    const double hi = detail::expand_until([&](double a) { return f(a) > 0.0; }, std::max(1.0, 2.0 * a_crit),
                                           "high_snr_fdr: full power");
    const double alpha = detail::bisect(f, a_crit, hi, "high_snr_fdr: full power");
    const double false_rate = 2.0 * (1.0 - eps) * normal_sf(alpha);
    out.regime = AmpRegime::full_power;
    out.alpha_star = alpha;
    out.q_star = false_rate / (eps + false_rate);
    out.power = 1.0;
    out.residual = std::abs(f(alpha));
    return out;
  }

  // Limited power: outer bisection on γ, inner on α through the R/p = δ equation.
  const auto alpha_of = [&](double g) {
    const auto rate = [&](double a) { return detail::limited_power_rate(a, g, eps) - delta; };
    const double hi = detail::expand_until([&](double a) { return rate(a) < 0.0; }, 1.0, "high_snr_fdr: alpha");
    return detail::bisect(rate, 0.0, hi, "high_snr_fdr: alpha");
  };
  const auto mse_gap = [&](double g) { return detail::limited_power_mse(alpha_of(g), g, eps) - delta; };
  const double g_hi = detail::expand_until([&](double g) { return mse_gap(g) > 0.0; }, 1.0, "high_snr_fdr: gamma");
  const double gamma = detail::bisect(mse_gap, 0.0, g_hi, "high_snr_fdr: gamma");
  const double alpha = alpha_of(gamma);
  out.regime = AmpRegime::limited_power;
  out.alpha_star = alpha;
  out.gamma_star = gamma;
  out.q_star = 2.0 * (1.0 - eps) * normal_sf(alpha) / delta;
  out.power = normal_sf(alpha + gamma) + normal_sf(alpha - gamma);
  out.residual = std::max(std::abs(detail::limited_power_mse(alpha, gamma, eps) - delta),
                          std::abs(detail::limited_power_rate(alpha, gamma, eps) - delta));
  return out;
}

/// q* over the grid ε × δ, row-major in ε.
inline std::vector<HighSnrPrediction> high_snr_sweep(const std::vector<double>& epsilons,
                                                     const std::vector<double>& deltas, unsigned threads = 0) {
  std::vector<HighSnrPrediction> out(epsilons.size() * deltas.size());
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = high_snr_fdr(epsilons[i / deltas.size()], deltas[i % deltas.size()]);
  });
  return out;
}

inline void write_prediction_csv(std::ostream& out, const std::vector<HighSnrPrediction>& rows) {
  out << "epsilon,delta,regime,alpha,gamma,q_star,power\n";
  for (const auto& r : rows) {
    out << format_real(r.epsilon) << ',' << format_real(r.delta) << ',' << to_string(r.regime) << ','
        << format_real(r.alpha_star) << ',' << (r.gamma_star ? format_real(*r.gamma_star) : std::string()) << ','
        << format_real(r.q_star) << ',' << format_real(r.power) << '\n';
  }
}

}  // namespace slope
