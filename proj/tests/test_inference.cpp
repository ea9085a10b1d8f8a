#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "slope/inference.hpp"
#include "slope/lambda_seq.hpp"
#include "test_util.hpp"

using namespace slope;

// With p = 4, q = 0.5: λ_BH ≈ (1.534, 1.150, 0.887, 0.674).
TEST(StepUpDown, HandEnumeration) {
  const VectorXd z{{-1.4, 0.1, 1.2, 0.9}};
  const RejectionSet su = step_up(z, 4, 0.5);
  const RejectionSet sd = step_down(z, 4, 0.5);
  EXPECT_EQ(su.count(), 3);
  EXPECT_EQ(su.rejected, (std::vector<Index>{0, 2, 3}));
  EXPECT_EQ(sd.count(), 0);

  const VectorXd z2{{2.0, 0.5, 1.0, 0.7}};
  EXPECT_EQ(step_up(z2, 4, 0.5).count(), 1);
  EXPECT_EQ(step_down(z2, 4, 0.5).count(), 1);

  const VectorXd all{{5.0, 4.0, 3.0, 2.0}};
  EXPECT_EQ(step_up(all, 4, 0.5).count(), 4);
  EXPECT_EQ(step_down(all, 4, 0.5).count(), 4);
  EXPECT_EQ(step_up(VectorXd::Zero(4), 4, 0.5).count(), 0);
}

TEST(StepUpDown, TiesAtThresholdAreNotRejected) {
  const double t = lambda_bh_at(1, 3, 0.1);
  EXPECT_EQ(step_up(VectorXd{{t, 0.0, 0.0}}, 3, 0.1).count(), 0);
  EXPECT_EQ(step_down(VectorXd{{t, 0.0, 0.0}}, 3, 0.1).count(), 0);
}

TEST(StepUpDown, InputChecks) {
  EXPECT_THROW(step_up(VectorXd::Zero(3), 4, 0.1), DimensionError);
  EXPECT_THROW(step_down(VectorXd::Zero(3), 3, 1.5), DomainError);
}

TEST(SlopeTest, BracketedByStepDownAndStepUp) {
  slope::Rng rng(51);
  const Index p = 60;
  const LambdaSequence lambda = lambda_bh(p, 0.2);
  int strict = 0;
  for (int t = 0; t < 3000; ++t) {
    VectorXd z = rng.normal_vector(p);
    const Index k = static_cast<Index>(rng.index(20));
    for (Index j = 0; j < k; ++j) z[j] += 1.0 + 3.0 * rng.uniform();
    const Index sd = step_down(z, p, 0.2).count();
    const Index su = step_up(z, p, 0.2).count();
    const Index s = slope_test(z, lambda).count();
    EXPECT_LE(sd, s);
    EXPECT_LE(s, su);
    strict += sd < su;
  }
  EXPECT_GT(strict, 0);  // the cases where the bracket has room do occur
}

TEST(SlopeTest, RejectsTopMagnitudes) {
  const VectorXd z{{0.3, -6.0, 2.5, 0.1}};
  const RejectionSet r = slope_test(z, LambdaSequence(VectorXd{{2.0, 1.5, 1.0, 0.5}}));
  // sorted (6, 2.5, 0.3, 0.1) − λ = (4, 1, −0.7, −0.4) → pooled tail is negative.
  EXPECT_EQ(r.rejected, (std::vector<Index>{1, 2}));
}

TEST(SelectSupport, Tolerance) {
  const VectorXd b{{1e-12, -3.0, 0.0, 2.0}};
  EXPECT_EQ(select_support(b).rejected, (std::vector<Index>{1, 3, 0}));
  EXPECT_EQ(select_support(b, 1e-10).rejected, (std::vector<Index>{1, 3}));
  EXPECT_DOUBLE_EQ(solver_zero_tolerance(LambdaSequence::constant(3, 4.0)), 4e-10);
}

TEST(FdrThreshold, HardThresholdsAtStepUpCut) {
  const VectorXd y{{-1.4, 0.1, 1.2, 0.9}};
  const FdrThresholdFit fit = fdr_threshold_fit(y, 4, 0.5);
  EXPECT_DOUBLE_EQ(fit.threshold, lambda_bh_at(3, 4, 0.5));
  EXPECT_TRUE(fit.estimate.isApprox(VectorXd{{-1.4, 0.0, 1.2, 0.9}}));

  const FdrThresholdFit none = fdr_threshold_fit(VectorXd::Constant(4, 0.1), 4, 0.5);
  EXPECT_TRUE(none.estimate.isZero());
  EXPECT_DOUBLE_EQ(none.threshold, lambda_bh_at(1, 4, 0.5));
}

TEST(Debias, MatchesNormalEquations) {
  slope::Rng rng(52);
  MatrixXd X(40, 10);
  for (Index j = 0; j < 10; ++j) X.col(j) = rng.normal_vector(40);
  const VectorXd y = rng.normal_vector(40);
  const std::vector<Index> S{1, 4, 7};
  MatrixXd XS(40, 3);
  for (int k = 0; k < 3; ++k) XS.col(k) = X.col(S[static_cast<std::size_t>(k)]);
  const VectorXd coef = (XS.transpose() * XS).inverse() * XS.transpose() * y;
  const VectorXd b = debias(X, y, S);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(b[S[static_cast<std::size_t>(k)]], coef[k], 1e-10);
  EXPECT_EQ((b.array() != 0.0).count(), 3);
  EXPECT_TRUE(debias(X, y, {}).isZero());

  const VectorXd via_op = debias(DenseOperator(X), y, S);
  EXPECT_LE((via_op - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Debias, SingularSupports) {
  MatrixXd X = MatrixXd::Zero(5, 4);
  X.col(0).setOnes();
  X.col(1).setOnes();
  X(0, 2) = 1.0;
  EXPECT_THROW(debias(X, VectorXd::Ones(5), {0, 1}), SingularError);
  EXPECT_THROW(debias(MatrixXd::Identity(3, 5), VectorXd::Ones(3), {0, 1, 2, 3}), SingularError);
  EXPECT_THROW(debias(X, VectorXd::Ones(5), {9}), DimensionError);
}

TEST(Metrics, HandCounts) {
  const VectorXd truth{{3.0, 0.0, -2.0, 0.0, 0.0}};
  const VectorXd est{{2.5, 0.4, 0.0, 0.0, -0.1}};
  const ExperimentMetrics m = metrics(est, truth);
  EXPECT_EQ(m.R, 3);
  EXPECT_EQ(m.V, 2);
  EXPECT_EQ(m.k, 2);
  EXPECT_DOUBLE_EQ(m.FDP, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.TPP, 0.5);
  EXPECT_DOUBLE_EQ(m.MSE, (0.25 + 0.16 + 4.0 + 0.01) / 5.0);

  const ExperimentMetrics empty = metrics(VectorXd::Zero(5), VectorXd::Zero(5));
  EXPECT_EQ(empty.FDP, 0.0);
  EXPECT_EQ(empty.TPP, 0.0);
}
