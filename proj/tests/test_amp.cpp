#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>
#include <algorithm>

#include "slope/amp.hpp"
#include "slope/normal.hpp"

using namespace slope;

namespace {

double soft(double x, double a) { return std::copysign(std::max(std::abs(x) - a, 0.0), x); }

template <class F>
double simpson(F f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * f(z) * normal_pdf(z);
  }
  return s * h / 3.0;
}

// Composite Simpson of f(z)φ(z) over [−14 − |shift|, 14 + |shift|], split at the given kinks.
template <class F>
double gauss_expect(F f, std::vector<double> kinks = {}) {
  double shift = 0.0;
  for (double k : kinks) shift = std::max(shift, std::abs(k));
  std::vector<double> cuts{-14.0 - shift};
  std::sort(kinks.begin(), kinks.end());
  for (double k : kinks) cuts.push_back(k);
  cuts.push_back(14.0 + shift);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) s += simpson(f, cuts[i], cuts[i + 1], 20000);
  }
  return s;
}

double G_oracle(double alpha, double eps) {
  return (1.0 - eps) * gauss_expect([&](double z) { return std::pow(soft(z, alpha), 2); }) +
         eps * (1.0 + alpha * alpha);
}

// ε*(δ) by scanning α on a grid for the minimum of G and bisecting in ε.
double weak_threshold_oracle(double delta) {
  auto min_G = [](double eps) {
    double best = std::numeric_limits<double>::infinity();
    for (double a = 0.0; a <= 4.0; a += 0.002) {
      const double g = (1.0 - eps) * 2.0 * ((1 + a * a) * normal_sf(a) - a * normal_pdf(a)) + eps * (1 + a * a);
      best = std::min(best, g);
    }
    return best;
  };
  double lo = 1e-6, hi = 1.0 - 1e-6;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (min_G(mid) < delta ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(SoftThreshold, MomentsMatchQuadrature) {
  for (double alpha : {0.0, 0.3, 1.0, 2.5}) {
    for (double gamma : {0.0, 0.5, 2.0, 7.0}) {
      const SoftThresholdMoments m = soft_threshold_moments(alpha, gamma);
      const std::vector<double> kinks{-alpha - gamma, alpha - gamma};
      EXPECT_NEAR(m.m2, gauss_expect([&](double z) { return std::pow(soft(gamma + z, alpha), 2); }, kinks), 1e-10);
      EXPECT_NEAR(m.miss,
                  gauss_expect([&](double z) { return std::pow(soft(gamma + z, alpha) - gamma, 2); }, kinks),
                  1e-10);
    }
    EXPECT_NEAR(null_soft_threshold_moment(alpha),
                gauss_expect([&](double z) { return std::pow(soft(z, alpha), 2); }), 1e-10);
  }
}

TEST(AlphaMin, Values) {
  EXPECT_EQ(alpha_min(1.0), 0.0);
  EXPECT_EQ(alpha_min(3.0), 0.0);
  for (double delta : {0.1, 0.3, 0.5, 0.9}) {
    const double a = alpha_min(delta);
    EXPECT_NEAR(null_soft_threshold_moment(a), delta, 1e-12);
  }
  EXPECT_NEAR(alpha_min(0.5), 0.4052, 1e-3);
  EXPECT_THROW(alpha_min(0.0), DomainError);
}

TEST(WeakThreshold, MatchesGridScan) {
  for (double delta : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    EXPECT_NEAR(weak_threshold(delta), weak_threshold_oracle(delta), 2e-5) << delta;
  }
  EXPECT_NEAR(weak_threshold(0.5), 0.192845, 1e-5);
  EXPECT_THROW(weak_threshold(1.0), DomainError);
}

TEST(HighSnr, RegimesFollowWeakThreshold) {
  const double delta = 0.5;
  const double eps_star = weak_threshold(delta);
  const HighSnrPrediction below = high_snr_fdr(eps_star - 1e-7, delta);
  const HighSnrPrediction above = high_snr_fdr(eps_star + 1e-7, delta);
  EXPECT_EQ(below.regime, AmpRegime::full_power);
  EXPECT_EQ(above.regime, AmpRegime::limited_power);
  ASSERT_TRUE(above.gamma_star.has_value());
  EXPECT_LT(above.power, 1.0);
  // q* is continuous across the boundary, approaching like a square root from below.
  EXPECT_NEAR(below.q_star, above.q_star, 1e-3);
  const double far = std::abs(high_snr_fdr(eps_star - 1e-4, delta).q_star - above.q_star);
  EXPECT_LT(std::abs(below.q_star - above.q_star), far);
  EXPECT_EQ(high_snr_fdr(0.9, 1.0).regime, AmpRegime::full_power);
}

TEST(HighSnr, FullPowerEquation) {
  for (double eps : {0.05, 0.1, 0.3}) {
    for (double delta : {1.0, 2.0}) {
      const HighSnrPrediction r = high_snr_fdr(eps, delta);
      EXPECT_NEAR(G_oracle(r.alpha_star, eps), delta, 1e-8);
      EXPECT_LE(r.residual, 1e-8);
      const double v = 2.0 * (1.0 - eps) * normal_sf(r.alpha_star);
      EXPECT_NEAR(r.q_star, v / (v + eps), 1e-14);
      // The discoveries fit within n: R/p < δ.
      EXPECT_LT(eps + v, delta);
    }
  }
}

TEST(HighSnr, LimitedPowerEquations) {
  const HighSnrPrediction r = high_snr_fdr(0.4, 0.5);
  ASSERT_EQ(r.regime, AmpRegime::limited_power);
  const double a = r.alpha_star, g = *r.gamma_star, eps = 0.4;
  const double rate = 2 * (1 - eps) * normal_sf(a) + eps * (normal_sf(a + g) + normal_sf(a - g));
  const double mse = (1 - eps) * gauss_expect([&](double z) { return std::pow(soft(z, a), 2); }) +
                     eps * gauss_expect([&](double z) { return std::pow(soft(g + z, a) - g, 2); });
  EXPECT_NEAR(rate, 0.5, 1e-9);
  EXPECT_NEAR(mse, 0.5, 1e-8);
  EXPECT_LE(r.residual, 1e-8);
}

TEST(HighSnr, SupremaOverSparsity) {
  for (const auto& [delta, expected] : {std::pair{2.0, 0.0801}, {1.0, 0.2723}, {0.5, 0.6142}}) {
    double best = 0.0;
    for (int i = 1; i < 200; ++i) best = std::max(best, high_snr_fdr(i / 200.0, delta).q_star);
    EXPECT_NEAR(best, expected, 2e-3) << delta;
  }
}

TEST(HighSnr, SweepOrderAndCsv) {
  const auto rows = high_snr_sweep({0.1, 0.2}, {0.5, 1.0, 2.0}, 2);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[4].epsilon, 0.2);
  EXPECT_EQ(rows[4].delta, 1.0);
  std::stringstream s;
  write_prediction_csv(s, rows);
  std::string header;
  std::getline(s, header);
  EXPECT_EQ(header, "epsilon,delta,regime,alpha,gamma,q_star,power");
  EXPECT_THROW(high_snr_fdr(0.0, 1.0), DomainError);
}

TEST(StateEvolution, FixedPointResiduals) {
  for (const PriorSpec& prior : {PriorSpec::point_mass(0.1, 5.0), PriorSpec::gaussian_mixture(0.2, 3.0)}) {
    for (double delta : {0.5, 1.0, 2.0}) {
      for (double lambda : {0.5, 2.0, 8.0}) {
        const AmpFixedPoint fp = state_evolution(prior, delta, lambda);
        EXPECT_LE(fp.max_residual(), 1e-8);
        EXPECT_GT(fp.alpha, alpha_min(delta));
        EXPECT_GE(fp.tau, 1.0);
        EXPECT_GE(fp.fdp, 0.0);
        EXPECT_LE(fp.fdp, 1.0);
        EXPECT_GE(fp.power, 0.0);
        EXPECT_LE(fp.power, 1.0);
      }
    }
  }
}

TEST(StateEvolution, ApproachesHighSnrLimit) {
  // Signals far above λ, which is itself far above the noise.
  const double eps = 0.1, delta = 1.0;
  const AmpFixedPoint fp = state_evolution(PriorSpec::point_mass(eps, 1e5), delta, 100.0);
  const HighSnrPrediction lim = high_snr_fdr(eps, delta);
  EXPECT_NEAR(fp.fdp, lim.q_star, 2e-3);
  EXPECT_NEAR(fp.power, 1.0, 1e-6);
}

TEST(StateEvolution, InputChecks) {
  EXPECT_THROW(state_evolution(PriorSpec::point_mass(1.5, 1.0), 1.0, 1.0), DomainError);
  EXPECT_THROW(state_evolution(PriorSpec::point_mass(0.1, 1.0), -1.0, 1.0), DomainError);
  EXPECT_THROW(state_evolution(PriorSpec::point_mass(0.1, 1.0), 1.0, 0.0), DomainError);
}
