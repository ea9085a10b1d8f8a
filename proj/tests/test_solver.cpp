#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "slope/linear_operator.hpp"
#include "slope/solver.hpp"
#include "test_util.hpp"

using namespace slope;
using tu::random_lambda;

namespace {

ProblemInstance random_problem(Rng& rng, Index n, Index p, double lambda_scale = 1.0) {
  MatrixXd X(n, p);
  for (Index j = 0; j < p; ++j) X.col(j) = rng.normal_vector(n, 1.0 / std::sqrt(static_cast<double>(n)));
  VectorXd beta = VectorXd::Zero(p);
  for (Index j = 0; j < std::min<Index>(5, p); ++j) beta[j] = 4.0;
  VectorXd y = X * beta + rng.normal_vector(n);
  return make_problem(std::move(X), std::move(y), random_lambda(rng, p, lambda_scale));
}

// Cyclic coordinate descent for the lasso, run to a fixed point.
VectorXd lasso_cd(const MatrixXd& X, const VectorXd& y, double lambda) {
  const Index p = X.cols();
  VectorXd b = VectorXd::Zero(p);
  VectorXd r = y;
  const VectorXd col_sq = X.colwise().squaredNorm();
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double change = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double z = X.col(j).dot(r) + col_sq[j] * b[j];
      const double nb = std::copysign(std::max(std::abs(z) - lambda, 0.0), z) / col_sq[j];
      if (nb != b[j]) {
        r -= (nb - b[j]) * X.col(j);
        change = std::max(change, std::abs(nb - b[j]));
        b[j] = nb;
      }
    }
    if (change < 1e-14) break;
  }
  return b;
}

// Distance from the prox fixed point b = prox_λ(b − ∇f(b)).
double fixed_point_residual(const ProblemInstance& prob, const VectorXd& b) {
  const MatrixXd& X = prob.design.matrix();
  return (b - prox_sorted_l1(b - X.transpose() * (X * b - prob.y), prob.lambda)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(SpectralNorm, MatchesSvd) {
  Rng rng(21);
  for (int t = 0; t < 10; ++t) {
    MatrixXd X(30, 45);
    for (Index j = 0; j < 45; ++j) X.col(j) = rng.normal_vector(30);
    const double sigma = Eigen::JacobiSVD<MatrixXd>(X).singularValues()[0];
    EXPECT_NEAR(spectral_norm_sq(X), sigma * sigma, 1e-9 * sigma * sigma);
  }
}

TEST(DctOperator, MatchesCosineMatrix) {
  const Index p = 16;
  const std::vector<Index> rows{0, 3, 5, 11};
  const double scale = 2.0;
  const DctOperator op(p, rows, scale);
  MatrixXd D(rows.size(), p);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double c = rows[k] == 0 ? std::sqrt(1.0 / p) : std::sqrt(2.0 / p);
    for (Index j = 0; j < p; ++j) {
      D(static_cast<Index>(k), j) =
          scale * c * std::cos(std::numbers::pi * static_cast<double>(rows[k] * (2 * j + 1)) / (2.0 * p));
    }
  }
  Rng rng(22);
  const VectorXd b = rng.normal_vector(p);
  const VectorXd r = rng.normal_vector(4);
  EXPECT_LE((op.apply(b) - D * b).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((op.apply_adjoint(r) - D.transpose() * r).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((op.to_dense() - D).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DctOperator, FullRowSetIsOrthogonal) {
  std::vector<Index> all(32);
  for (Index i = 0; i < 32; ++i) all[static_cast<std::size_t>(i)] = i;
  const MatrixXd D = DctOperator(32, all, 1.0).to_dense();
  EXPECT_TRUE((D.transpose() * D).isIdentity(1e-12));
  EXPECT_THROW(DctOperator(8, {8}, 1.0), DimensionError);
}

TEST(Solver, IdentityDesignGivesProxInOneStep) {
  Rng rng(23);
  const VectorXd y = rng.normal_vector(40, 3.0);
  const LambdaSequence lambda = random_lambda(rng, 40);
  const SolverResult r = fista_solve(make_problem(MatrixXd::Identity(40, 40), y, lambda));
  EXPECT_TRUE(r.converged());
  EXPECT_EQ(r.iters, 1u);
  EXPECT_LE((r.b - prox_sorted_l1(y, lambda)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Solver, FistaAndProxGradientAgree) {
  Rng rng(24);
  for (int t = 0; t < 10; ++t) {
    const ProblemInstance prob = random_problem(rng, 40, 80);
    SolverConfig cfg;
    cfg.gap_tol = 1e-9;
    cfg.infeas_tol = 1e-9;
    cfg.max_iters = 200000;
    const SolverResult a = fista_solve(prob, cfg);
    const SolverResult b = prox_gradient_solve(prob, cfg);
    ASSERT_TRUE(a.converged());
    ASSERT_TRUE(b.converged());
    EXPECT_NEAR(a.objective, b.objective, 2e-9);
    EXPECT_LE(a.gap, 1e-9);
    EXPECT_LE(fixed_point_residual(prob, a.b), 1e-4);
    // Only infeasibility of the residual can push the gap below zero: gap ≥ −infeas·‖b‖∞.
    EXPECT_GE(a.gap, -a.infeasibility * a.b.cwiseAbs().maxCoeff() - 1e-12 * std::max(1.0, a.objective));
  }
}

TEST(Solver, LassoMatchesCoordinateDescent) {
  Rng rng(25);
  for (int t = 0; t < 5; ++t) {
    MatrixXd X(30, 20);
    for (Index j = 0; j < 20; ++j) X.col(j) = rng.normal_vector(30);
    const VectorXd y = X.leftCols(3) * VectorXd::Constant(3, 2.0) + rng.normal_vector(30);
    const double lambda = 3.0;
    SolverConfig cfg;
    cfg.gap_tol = 1e-12;
    cfg.infeas_tol = 1e-12;
    cfg.max_iters = 500000;
    const SolverResult r = fista_solve(make_problem(X, y, LambdaSequence::constant(20, lambda)), cfg);
    ASSERT_TRUE(r.converged());
    EXPECT_LE((r.b - lasso_cd(X, y, lambda)).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Solver, BacktrackingConverges) {
  Rng rng(26);
  const ProblemInstance prob = random_problem(rng, 30, 60);
  SolverConfig cfg;
  cfg.step_rule = Backtracking{10.0, 0.5};
  cfg.gap_tol = 1e-8;
  cfg.infeas_tol = 1e-8;
  cfg.max_iters = 100000;
  const SolverResult r = fista_solve(prob, cfg);
  ASSERT_TRUE(r.converged());
  EXPECT_LE(r.final_step, 10.0);
  EXPECT_GE(r.final_step, 0.5 / spectral_norm_sq(prob.design));
  SolverConfig fixed = cfg;
  fixed.step_rule = FixedStep{};
  EXPECT_NEAR(fista_solve(prob, fixed).objective, r.objective, 1e-7);
  cfg.step_rule = Backtracking{1.0, 1.5};
  EXPECT_THROW(fista_solve(prob, cfg), ConfigError);
}

TEST(Solver, HistoryIsMonotoneForProxGradient) {
  Rng rng(27);
  const ProblemInstance prob = random_problem(rng, 30, 50);
  SolverConfig cfg;
  cfg.record_history = true;
  cfg.max_iters = 60;
  cfg.gap_tol = 0.0;
  const SolverResult r = prox_gradient_solve(prob, cfg);
  EXPECT_EQ(r.termination, Termination::max_iters);
  EXPECT_EQ(r.history.size(), 61u);
  for (std::size_t k = 1; k < r.history.size(); ++k) {
    EXPECT_LE(r.history[k].objective, r.history[k - 1].objective + 1e-12);
  }
}

TEST(Solver, MaxItersReported) {
  Rng rng(28);
  const ProblemInstance prob = random_problem(rng, 20, 40);
  SolverConfig cfg;
  cfg.max_iters = 2;
  cfg.gap_tol = 1e-14;
  const SolverResult r = fista_solve(prob, cfg);
  EXPECT_FALSE(r.converged());
  EXPECT_EQ(r.iters, 2u);
  EXPECT_STREQ(to_string(r.termination), "max_iters");
}

TEST(Solver, DefaultTolerances) {
  Rng rng(29);
  const ProblemInstance prob = random_problem(rng, 20, 40);
  const SolverResult r = fista_solve(prob);
  EXPECT_DOUBLE_EQ(r.gap_tol, 1e-6 * std::max(1.0, 0.5 * prob.y.squaredNorm()));
  EXPECT_DOUBLE_EQ(r.infeas_tol, 1e-6 * prob.lambda.front());
  EXPECT_TRUE(r.converged());
  const DualityGap g = duality_gap(prob, r.b);
  EXPECT_NEAR(g.gap, r.gap, 1e-9 * std::max(1.0, std::abs(r.gap)));
}

TEST(Solver, WarmStartAndDimensionChecks) {
  Rng rng(30);
  const ProblemInstance prob = random_problem(rng, 20, 40);
  const SolverResult cold = fista_solve(prob);
  const SolverResult warm = fista_solve(prob, {}, cold.b);
  EXPECT_EQ(warm.iters, 0u);
  EXPECT_THROW(fista_solve(prob, {}, VectorXd::Zero(3)), DimensionError);
  EXPECT_THROW(make_problem(MatrixXd::Zero(3, 4), VectorXd::Zero(2), LambdaSequence::constant(4, 1.0)),
               DimensionError);
}

TEST(Solver, MatrixFreeDctMatchesDense) {
  Rng rng(31);
  const Index p = 64;
  std::vector<Index> rows{0, 2, 5, 7, 9, 13, 17, 20, 25, 31, 33, 40, 44, 51, 57, 60};
  const DctOperator op(p, rows, 2.0);
  VectorXd beta = VectorXd::Zero(p);
  beta[3] = 5;
  beta[10] = -4;
  const VectorXd y = op.apply(beta) + rng.normal_vector(16, 0.1);
  const LambdaSequence lambda = LambdaSequence::constant(p, 0.5);
  SolverConfig cfg;
  cfg.gap_tol = 1e-10;
  cfg.infeas_tol = 1e-10;
  cfg.max_iters = 200000;
  const SolverResult a = fista_solve(Problem<DctOperator>(op, y, lambda), cfg);
  const SolverResult b = fista_solve(make_problem(op.to_dense(), y, lambda), cfg);
  ASSERT_TRUE(a.converged());
  EXPECT_NEAR(a.objective, b.objective, 1e-9);
}

TEST(Solver, FistaTheta) {
  EXPECT_NEAR(fista_next_theta(1.0), 2.0 / (1.0 + std::sqrt(5.0)), 1e-15);
  double theta = 1.0;
  for (int k = 0; k < 1000; ++k) theta = fista_next_theta(theta);
  EXPECT_NEAR(theta, 2.0 / 1002.0, 2e-4);  // θ_k ≈ 2/(k + 2)
}
