#pragma once

// Proximal-gradient and FISTA solvers for
//
//     minimize_b  ½‖y − Xb‖² + J_λ(b)
//
// stopped when both the primal-dual gap and the infeasibility of the dual
// point ŵ = y − Xb fall below tolerance.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "slope/errors.hpp"
#include "slope/linear_operator.hpp"
#include "slope/rng.hpp"
#include "slope/sorted_l1.hpp"

namespace slope {

template <LinearOperator Op = DenseOperator>
struct Problem {
  Op design;
  VectorXd y;
  LambdaSequence lambda;

  Problem(Op X, VectorXd response, LambdaSequence weights)
      : design(std::move(X)), y(std::move(response)), lambda(std::move(weights)) {
    detail::require_same_size(design.rows(), y.size(), "Problem: rows(X) vs length(y)");
    detail::require_same_size(design.cols(), lambda.size(), "Problem: cols(X) vs length(lambda)");
  }

  Index n() const { return design.rows(); }
  Index p() const { return design.cols(); }
};

using ProblemInstance = Problem<DenseOperator>;

inline ProblemInstance make_problem(MatrixXd X, VectorXd y, LambdaSequence lambda) {
  return ProblemInstance(DenseOperator(std::move(X)), std::move(y), std::move(lambda));
}

/// t_k = t. A nonpositive t selects 1/‖X‖².
struct FixedStep {
  double t = 0.0;
};

/// Backtracking on the smooth part: shrink t until
/// f(b⁺) ≤ f(a) + ∇f(a)ᵀ(b⁺ − a) + ‖b⁺ − a‖²/(2t).
struct Backtracking {
  double initial = 1.0;
  double shrink = 0.5;
};

using StepRule = std::variant<FixedStep, Backtracking>;

struct SolverConfig {
  StepRule step_rule = FixedStep{};
  std::optional<double> gap_tol;     ///< default 1e-6·max(1, ½‖y‖²)
  std::optional<double> infeas_tol;  ///< default 1e-6·λ_1
  std::size_t max_iters = 20000;
  bool record_history = false;
};

enum class Termination { converged, max_iters };

inline const char* to_string(Termination t) {
  return t == Termination::converged ? "converged" : "max_iters";
}

struct IterationRecord {
  std::size_t iter;
  double objective;
  double gap;
  double infeasibility;
};

struct SolverResult {
  VectorXd b;
  double objective = 0.0;
  double gap = 0.0;
  double infeasibility = 0.0;
  std::size_t iters = 0;
  Termination termination = Termination::max_iters;
  double final_step = 0.0;
  double gap_tol = 0.0;
  double infeas_tol = 0.0;
  std::vector<IterationRecord> history;

  bool converged() const { return termination == Termination::converged; }
};

/// FISTA iterate (b^k, a^k, θ_k).
struct SolverState {
  VectorXd b;
  VectorXd a;
  double theta = 1.0;
  std::size_t iter = 0;
};

/// θ_{k+1} from θ_k: θ_{k+1}^{-1} = ½(1 + √(1 + 4/θ_k²)).
inline double fista_next_theta(double theta) {
  return 1.0 / (0.5 * (1.0 + std::sqrt(1.0 + 4.0 / (theta * theta))));
}

struct DualityGap {
  double gap;
  double infeasibility;
};

template <LinearOperator Op>
double objective(const Problem<Op>& prob, const VectorXd& b) {
  detail::require_same_size(b.size(), prob.p(), "objective");
  return 0.5 * (prob.y - prob.design.apply(b)).squaredNorm() + sorted_l1_norm(b, prob.lambda);
}

/// δ(b) = (Xb)ᵀ(Xb − y) + J_λ(b), and the infeasibility of Xᵀ(y − Xb) in C_λ.
template <LinearOperator Op>
DualityGap duality_gap(const Problem<Op>& prob, const VectorXd& b) {
  detail::require_same_size(b.size(), prob.p(), "duality_gap");
  const VectorXd fit = prob.design.apply(b);
  const VectorXd residual = prob.y - fit;
  return {-fit.dot(residual) + sorted_l1_norm(b, prob.lambda),
          dual_infeasibility(prob.design.apply_adjoint(residual), prob.lambda)};
}

/// ‖X‖² (largest eigenvalue of XᵀX) by power iteration from a seeded random start.
template <LinearOperator Op>
double spectral_norm_sq(const Op& op, std::uint64_t seed = 0x5EED, double rel_tol = 1e-13,
                        std::size_t max_iters = 100000) {
  if (op.rows() == 0 || op.cols() == 0) throw DimensionError("spectral_norm_sq: empty matrix");
  Rng rng(seed);
  VectorXd v = rng.normal_vector(op.cols());
  v.normalize();
  double estimate = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    VectorXd w = op.apply_adjoint(op.apply(v));
    const double rayleigh = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 0 && std::abs(rayleigh - estimate) <= rel_tol * std::abs(rayleigh)) return rayleigh;
    estimate = rayleigh;
  }
  return estimate;
}

inline double spectral_norm_sq(const MatrixXd& X) { return spectral_norm_sq(DenseOperator(X)); }

namespace detail {

struct Tolerances {
  double gap;
  double infeas;
};

template <LinearOperator Op>
Tolerances resolve_tolerances(const Problem<Op>& prob, const SolverConfig& cfg) {
  return {cfg.gap_tol.value_or(1e-6 * std::max(1.0, 0.5 * prob.y.squaredNorm())),
          cfg.infeas_tol.value_or(1e-6 * prob.lambda.front())};
}

// Quantities at one primal point, given Xb and g = Xᵀ(Xb − y).
struct PointEval {
  double objective;
  double gap;
  double infeasibility;
};

inline PointEval evaluate_point(const VectorXd& y, const LambdaSequence& lambda, const VectorXd& b,
                                const VectorXd& fit, const VectorXd& grad) {
  const VectorXd residual = y - fit;
  const double penalty = sorted_l1_norm(b, lambda);
  return {0.5 * residual.squaredNorm() + penalty, -fit.dot(residual) + penalty,
          dual_infeasibility(-grad, lambda)};
}

template <LinearOperator Op>
double initial_step(const Problem<Op>& prob, const StepRule& rule) {
  if (const auto* fixed = std::get_if<FixedStep>(&rule)) {
    if (fixed->t > 0.0) return fixed->t;
    const double lipschitz = spectral_norm_sq(prob.design);
    return lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;
  }
  const auto& bt = std::get<Backtracking>(rule);
  if (!(bt.initial > 0.0) || !(bt.shrink > 0.0 && bt.shrink < 1.0)) {
    throw ConfigError("Backtracking: need initial > 0 and 0 < shrink < 1");
  }
  return bt.initial;
}

// One forward-backward step from point `a` (with fit Xa and gradient grad_a).
// Returns b⁺ and its fit Xb⁺; updates t when backtracking.
template <LinearOperator Op>
std::pair<VectorXd, VectorXd> forward_backward(const Problem<Op>& prob, const StepRule& rule,
                                               double& t, const VectorXd& a, const VectorXd& fit_a,
                                               const VectorXd& grad_a) {
  const bool backtrack = std::holds_alternative<Backtracking>(rule);
  const double shrink = backtrack ? std::get<Backtracking>(rule).shrink : 1.0;
  const double smooth_a = 0.5 * (fit_a - prob.y).squaredNorm();
  for (int attempt = 0; attempt < 200; ++attempt) {
    VectorXd b = prox_sorted_l1(a - t * grad_a, prob.lambda.scaled(t));
    VectorXd fit_b = prob.design.apply(b);
    if (!backtrack) return {std::move(b), std::move(fit_b)};
    const VectorXd step = b - a;
    const double smooth_b = 0.5 * (fit_b - prob.y).squaredNorm();
    const double bound = smooth_a + grad_a.dot(step) + step.squaredNorm() / (2.0 * t);
    if (smooth_b <= bound + 1e-12 * std::abs(bound)) return {std::move(b), std::move(fit_b)};
    t *= shrink;
  }
  throw NonconvergenceError("backtracking line search did not find an acceptable step");
}

template <LinearOperator Op>
SolverResult run_solver(const Problem<Op>& prob, const SolverConfig& cfg, const VectorXd& b0,
                        bool accelerate) {
  const Index p = prob.p();
  const VectorXd start = b0.size() == 0 ? VectorXd::Zero(p) : b0;
  require_same_size(start.size(), p, "solver: length(b0) vs cols(X)");
  const Tolerances tol = resolve_tolerances(prob, cfg);
  double t = initial_step(prob, cfg.step_rule);

  SolverState state{start, start, 1.0, 0};
  VectorXd fit = prob.design.apply(state.b);
  VectorXd grad = prob.design.apply_adjoint(fit - prob.y);
  VectorXd fit_a = fit;
  VectorXd grad_a = grad;

  SolverResult result;
  result.gap_tol = tol.gap;
  result.infeas_tol = tol.infeas;
  for (;;) {
    const PointEval ev = evaluate_point(prob.y, prob.lambda, state.b, fit, grad);
    if (cfg.record_history) {
      result.history.push_back({state.iter, ev.objective, ev.gap, ev.infeasibility});
    }
    const bool done = ev.gap <= tol.gap && ev.infeasibility <= tol.infeas;
    if (done || state.iter >= cfg.max_iters) {
      result.b = state.b;
      result.objective = ev.objective;
      result.gap = ev.gap;
      result.infeasibility = ev.infeasibility;
      result.iters = state.iter;
      result.termination = done ? Termination::converged : Termination::max_iters;
      result.final_step = t;
      return result;
    }

    const VectorXd& from = accelerate ? state.a : state.b;
    auto [b_next, fit_next] = forward_backward(prob, cfg.step_rule, t, from,
                                               accelerate ? fit_a : fit, accelerate ? grad_a : grad);
    VectorXd grad_next = prob.design.apply_adjoint(fit_next - prob.y);

    if (accelerate) {
      // a^{k+1} = b^{k+1} + θ_{k+1}(θ_k^{-1} − 1)(b^{k+1} − b^k); Xa and ∇f(a) follow by linearity.
      const double theta_next = fista_next_theta(state.theta);
      const double momentum = theta_next * (1.0 / state.theta - 1.0);
      state.a = b_next + momentum * (b_next - state.b);
      fit_a = fit_next + momentum * (fit_next - fit);
      grad_a = grad_next + momentum * (grad_next - grad);
      state.theta = theta_next;
    }
    state.b = std::move(b_next);
    fit = std::move(fit_next);
    grad = std::move(grad_next);
    ++state.iter;
  }
}

}  // namespace detail

/// b^{k+1} = prox_{tλ}(b^k − t Xᵀ(Xb^k − y)).
template <LinearOperator Op>
SolverResult prox_gradient_solve(const Problem<Op>& prob, const SolverConfig& cfg = {},
                                 const VectorXd& b0 = VectorXd()) {
  return detail::run_solver(prob, cfg, b0, /*accelerate=*/false);
}

/// Accelerated proximal gradient with a^0 = b^0, θ_0 = 1.
template <LinearOperator Op>
SolverResult fista_solve(const Problem<Op>& prob, const SolverConfig& cfg = {},
                         const VectorXd& b0 = VectorXd()) {
  return detail::run_solver(prob, cfg, b0, /*accelerate=*/true);
}

}  // namespace slope
