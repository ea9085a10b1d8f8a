#pragma once

// Replicated simulation experiments: draw design, signal and noise, run a
// selection method, optionally refit by least squares, and score the result.
//
// Replication r uses seed derive_seed(master_seed, r) and splits it into
// independent streams for the design (1), the signal (2) and the noise (3).
// Fixed designs are drawn once from design.seed. Results are stored by
// replication index, so the worker count never changes the output.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "slope/design.hpp"
#include "slope/errors.hpp"
#include "slope/inference.hpp"
#include "slope/lambda_seq.hpp"
#include "slope/parallel.hpp"
#include "slope/rng.hpp"
#include "slope/signal.hpp"
#include "slope/solver.hpp"

namespace slope {

enum class MethodKind { slope, lasso, bh_marginal, fdr_threshold };

inline const char* to_string(MethodKind m) {
  switch (m) {
    case MethodKind::slope: return "slope";
    case MethodKind::lasso: return "lasso";
    case MethodKind::bh_marginal: return "bh_marginal";
    case MethodKind::fdr_threshold: return "fdr_threshold";
  }
  return "unknown";
}

struct MethodSpec {
  MethodKind kind = MethodKind::slope;
  SequenceKind lambda_kind = SequenceKind::bh;  ///< slope
  double q = 0.1;
  std::optional<double> lambda;                 ///< lasso; defaults to λ_BH(1)
  std::shared_ptr<const WeightTable> weight_table;  ///< slope with bhc_weighted
};

struct SolverSettings {
  std::optional<double> gap_tol;
  std::optional<double> infeas_tol;
  std::size_t max_iters = 20000;
};

struct ExperimentConfig {
  DesignSpec design;
  SignalSpec signal;
  MethodSpec method;
  bool debias = false;
  std::size_t replications = 100;
  double noise_sd = 1.0;
  std::uint64_t master_seed = 1;
  unsigned threads = 0;
  SolverSettings solver;
};

struct ReplicationRecord {
  std::size_t rep = 0;
  ExperimentMetrics metrics;
  bool converged = true;
  std::size_t iters = 0;
};

struct Aggregate {
  double mean = 0.0;
  double std_error = 0.0;
};

struct ExperimentReport {
  std::vector<ReplicationRecord> records;
  Aggregate fdr;
  Aggregate tpp;
  Aggregate mse;
  Aggregate rejections;
  std::size_t failures = 0;
  std::size_t used = 0;             ///< replications entering the aggregates
  std::optional<Index> k_star;      ///< for corrected sequences
  std::optional<double> lambda_1;   ///< first (or only) penalty value
};

inline Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return a;
}

/// Lasso through the SLOPE solver with a constant sequence.
template <LinearOperator Op>
SolverResult lasso_solve(const Op& X, const VectorXd& y, double lambda, const SolverConfig& cfg = {}) {
  if (!(lambda > 0.0)) throw DomainError("lasso: lambda must be positive");
  return fista_solve(Problem<Op>(X, y, LambdaSequence::constant(X.cols(), lambda)), cfg);
}

inline VectorXd lasso_reference(const MatrixXd& X, const VectorXd& y, double lambda, const SolverConfig& cfg = {}) {
  return lasso_solve(DenseOperator(X), y, lambda, cfg).b;
}

/// BHq step-up on the marginal statistics z = Xᵀy (unit-norm columns assumed).
template <LinearOperator Op>
RejectionSet bh_marginal(const Op& X, const VectorXd& y, double q) {
  return step_up(X.apply_adjoint(y), X.cols(), q);
}

inline RejectionSet bh_marginal(const MatrixXd& X, const VectorXd& y, double q) {
  return bh_marginal(DenseOperator(X), y, q);
}

namespace detail {

struct MethodOutcome {
  VectorXd estimate;
  std::vector<Index> selected;
  bool converged = true;
  std::size_t iters = 0;
};

inline SolverConfig solver_config(const SolverSettings& s) {
  SolverConfig cfg;
  cfg.gap_tol = s.gap_tol;
  cfg.infeas_tol = s.infeas_tol;
  cfg.max_iters = s.max_iters;
  return cfg;
}

template <LinearOperator Op>
MethodOutcome run_method(const ExperimentConfig& cfg, const Op& X, const VectorXd& y, const LambdaSequence* lambda) {
  const Index p = X.cols();
  MethodOutcome out;
  switch (cfg.method.kind) {
    case MethodKind::slope:
    case MethodKind::lasso: {
      if (design_is_orthogonal(cfg.design.kind)) {
        out.estimate = prox_sorted_l1(X.apply_adjoint(y), *lambda);
        out.selected = select_support(out.estimate).rejected;
      } else {
        const SolverResult r = fista_solve(Problem<Op>(X, y, *lambda), solver_config(cfg.solver));
        out.converged = r.converged();
        out.iters = r.iters;
        const double tol = solver_zero_tolerance(*lambda);
        out.estimate = r.b.unaryExpr([tol](double v) { return std::abs(v) > tol ? v : 0.0; });
        out.selected = select_support(out.estimate).rejected;
      }
      break;
    }
    case MethodKind::bh_marginal: {
      const VectorXd z = X.apply_adjoint(y);
      out.selected = step_up(z, p, cfg.method.q).rejected;
      out.estimate = VectorXd::Zero(p);
      for (Index j : out.selected) out.estimate[j] = z[j];
      break;
    }
    case MethodKind::fdr_threshold: {
      out.estimate = fdr_threshold_estimate(X.apply_adjoint(y), p, cfg.method.q);
      out.selected = select_support(out.estimate).rejected;
      break;
    }
  }
  if (cfg.debias && cfg.method.kind != MethodKind::bh_marginal) {
    std::sort(out.selected.begin(), out.selected.end());
    if (static_cast<Index>(out.selected.size()) <= X.rows()) out.estimate = debias(X, y, out.selected);
  }
  return out;
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.replications < 1) throw ConfigError("experiment: replications must be at least 1");
  if (cfg.signal.p != cfg.design.p) throw ConfigError("experiment: signal.p must equal design.p");
  if (!(cfg.noise_sd >= 0.0)) throw ConfigError("experiment: noise_sd must be nonnegative");
  if (!(cfg.method.q > 0.0 && cfg.method.q < 1.0)) throw ConfigError("experiment: q must lie in (0, 1)");
}

}  // namespace detail

/// The penalty sequence used by slope and lasso experiments, with k* when corrected.
inline CorrectedSequence experiment_lambda(const ExperimentConfig& cfg) {
  const Index p = cfg.design.p;
  if (cfg.method.kind == MethodKind::lasso) {
    const double l = cfg.method.lambda.value_or(lambda_bh_at(1, p, cfg.method.q));
    LambdaSequence seq = LambdaSequence::constant(p, l);
    return {seq, p, seq.values()};
  }
  SequenceSpec spec;
  spec.kind = cfg.method.lambda_kind;
  spec.p = p;
  spec.q = cfg.method.q;
  spec.n = cfg.design.n;
  spec.table = cfg.method.weight_table;
  return make_sequence(spec);
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  detail::validate(cfg);
  const bool penalized = cfg.method.kind == MethodKind::slope || cfg.method.kind == MethodKind::lasso;

  ExperimentReport report;
  std::optional<CorrectedSequence> seq;
  if (penalized) {
    seq = experiment_lambda(cfg);
    report.lambda_1 = seq->lambda.front();
    if (cfg.method.kind == MethodKind::slope && cfg.method.lambda_kind != SequenceKind::bh) report.k_star = seq->k_star;
  }

  std::optional<Design> fixed;
  if (design_is_fixed(cfg.design.kind)) fixed = make_design(cfg.design);

  report.records.resize(cfg.replications);
  parallel_for(cfg.replications, cfg.threads, [&](std::size_t rep) {
    const std::uint64_t seed = derive_seed(cfg.master_seed, rep);
    const Design design = fixed ? *fixed : make_design(cfg.design, derive_seed(seed, 1));
    const VectorXd beta = make_signal(cfg.signal, derive_seed(seed, 2));
    Rng noise(derive_seed(seed, 3));
    std::visit(
        [&](const auto& X) {
          const VectorXd y = X.apply(beta) + noise.normal_vector(X.rows(), cfg.noise_sd);
          const detail::MethodOutcome out = detail::run_method(cfg, X, y, seq ? &seq->lambda : nullptr);
          ReplicationRecord& rec = report.records[rep];
          rec.rep = rep;
          rec.metrics = metrics(out.selected, out.estimate, beta);
          rec.converged = out.converged;
          rec.iters = out.iters;
        },
        design);
  });

  std::vector<double> fdp, tpp, mse, r;
  for (const auto& rec : report.records) {
    if (!rec.converged) {
      ++report.failures;
      continue;
    }
    fdp.push_back(rec.metrics.FDP);
    tpp.push_back(rec.metrics.TPP);
    mse.push_back(rec.metrics.MSE);
    r.push_back(static_cast<double>(rec.metrics.R));
  }
  if (report.failures * 100 > cfg.replications) {
    throw NonconvergenceError("experiment: " + std::to_string(report.failures) + " of " +
                              std::to_string(cfg.replications) + " replications did not converge");
  }
  report.used = fdp.size();
  report.fdr = aggregate(fdp);
  report.tpp = aggregate(tpp);
  report.mse = aggregate(mse);
  report.rejections = aggregate(r);
  return report;
}

}  // namespace slope
