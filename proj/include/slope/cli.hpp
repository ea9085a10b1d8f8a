#pragma once

// Command-line front end. Results go to files or standard output; the
// resolved configuration and progress go to standard error.
//
// Exit codes: 0 success, 2 bad arguments, 3 input parse failure,
// 4 solver nonconvergence, 5 internal invariant violation.

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slope/amp.hpp"
#include "slope/config.hpp"
#include "slope/design.hpp"
#include "slope/errors.hpp"
#include "slope/experiment.hpp"
#include "slope/format.hpp"
#include "slope/io.hpp"
#include "slope/lambda_seq.hpp"
#include "slope/solver.hpp"
#include "slope/sorted_l1.hpp"
#include "slope/version.hpp"

namespace slope {

enum ExitCode : int {
  exit_ok = 0,
  exit_bad_args = 2,
  exit_parse = 3,
  exit_nonconvergence = 4,
  exit_invariant = 5,
};

namespace cli_detail {

// Writes to `path`, or to `fallback` when the path is empty.
inline void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot write " + path);
  write(file);
}

inline void print_resolved(std::ostream& err, const std::string& command, const Json& cfg) {
  err << "slope " << command << " config: " << cfg.dump() << '\n';
}

inline DesignKind parse_design_kind(const std::string& s) {
  if (s == "orthogonal") return DesignKind::orthogonal;
  if (s == "gaussian_iid" || s == "gaussian") return DesignKind::gaussian_iid;
  if (s == "dct_restricted" || s == "dct") return DesignKind::dct_restricted;
  if (s == "equicorrelated_whitened" || s == "equicorrelated") return DesignKind::equicorrelated_whitened;
  throw ConfigError("unknown design '" + s + "'");
}

struct Options {
  // prox / solve
  std::string y_path, lambda_path, x_path, out_path, report_path;
  std::optional<Index> declared_n, declared_p;
  std::string solver_name = "fista";
  std::optional<double> gap_tol, infeas_tol;
  std::size_t max_iters = 20000;
  // lambda
  Index n = 0, p = 0;
  double q = 0.1;
  std::string kind = "bh";
  std::string weights_path, summary_path;
  std::string denominator = "n-i+1";
  std::string variant = "bh";
  // weights
  std::string design = "gaussian_iid";
  double rho = 0.5;
  std::uint64_t seed = 1;
  std::vector<Index> ks;
  std::size_t initial_samples = 64;
  double rel_tol = 0.02;
  unsigned threads = 0;
  // simulate
  std::string config_path;
  // predict
  std::vector<double> epsilons, deltas;
  double eps_min = 0.01, eps_max = 0.99;
  std::size_t eps_steps = 99;
};

inline std::optional<Json> declared_dims(const Options& o) {
  if (!o.declared_n && !o.declared_p) return std::nullopt;
  Json j;
  if (o.declared_n) j["n"] = *o.declared_n;
  if (o.declared_p) j["p"] = *o.declared_p;
  return j;
}

// A user-supplied sequence that breaks the ordering rules is bad input, not a broken invariant.
inline LambdaSequence load_lambda(const std::string& path) {
  try {
    return LambdaSequence(load_vector(path));
  } catch (const ContractError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline int cmd_prox(const Options& o, std::ostream& out, std::ostream& err) {
  print_resolved(err, "prox", {{"y", o.y_path}, {"lambda", o.lambda_path}, {"out", o.out_path}});
  const VectorXd y = load_vector(o.y_path);
  const LambdaSequence lambda = load_lambda(o.lambda_path);
  detail::require_same_size(y.size(), lambda.size(), "prox: length(y) vs length(lambda)");
  const VectorXd x = prox_sorted_l1(y, lambda);
  emit(o.out_path, out, [&](std::ostream& s) { write_csv_vector(s, x, "x"); });
  return exit_ok;
}

inline CorrectedSequence sequence_from_options(const Options& o, Index n, Index p) {
  if (o.kind == "bh") {
    LambdaSequence l = lambda_bh(p, o.q);
    return {l, p, l.values()};
  }
  if (o.kind == "bhc-gaussian" || o.kind == "bhc_gaussian") {
    CorrectionDenominator d;
    if (o.denominator == "n-i+1") d = CorrectionDenominator::n_minus_i_plus_1;
    else if (o.denominator == "n-i") d = CorrectionDenominator::n_minus_i;
    else if (o.denominator == "n-i-1") d = CorrectionDenominator::n_minus_i_minus_1;
    else throw ConfigError("unknown denominator '" + o.denominator + "'");
    CorrectionVariant v;
    if (o.variant == "bh") v = CorrectionVariant::bh_sum;
    else if (o.variant == "recursive") v = CorrectionVariant::corrected_sum;
    else throw ConfigError("unknown variant '" + o.variant + "'");
    if (n < 2) throw ConfigError("--n is required for bhc-gaussian");
    return lambda_bhc_gaussian(n, p, o.q, d, v);
  }
  if (o.kind == "bhc-weighted" || o.kind == "bhc_weighted") {
    if (o.weights_path.empty()) throw ConfigError("--weights is required for bhc-weighted");
    std::ifstream in(o.weights_path);
    if (!in) throw ParseError("cannot open " + o.weights_path);
    return lambda_bhc_weighted(WeightTable::read_csv(in), p, o.q);
  }
  throw ConfigError("unknown kind '" + o.kind + "'");
}

inline int cmd_solve(const Options& o, std::ostream& out, std::ostream& err) {
  Json cfg = {{"X", o.x_path}, {"y", o.y_path}, {"solver", o.solver_name}, {"max_iters", o.max_iters}};
  if (!o.lambda_path.empty()) cfg["lambda"] = o.lambda_path;
  else cfg["lambda_spec"] = {{"kind", o.kind}, {"q", o.q}};
  if (o.gap_tol) cfg["gap_tol"] = *o.gap_tol;
  if (o.infeas_tol) cfg["infeas_tol"] = *o.infeas_tol;
  if (auto dims = declared_dims(o)) cfg["declared"] = *dims;
  print_resolved(err, "solve", cfg);

  MatrixXd X = load_matrix(o.x_path);
  const VectorXd y = load_vector(o.y_path);
  if (o.declared_n && X.rows() != *o.declared_n) {
    throw ParseError(o.x_path + ": " + std::to_string(X.rows()) + " rows, declared " + std::to_string(*o.declared_n));
  }
  if (o.declared_p && X.cols() != *o.declared_p) {
    throw ParseError(o.x_path + ": " + std::to_string(X.cols()) + " columns, declared " +
                     std::to_string(*o.declared_p));
  }
  if (y.size() != X.rows()) {
    throw ParseError(o.y_path + ": length " + std::to_string(y.size()) + " does not match " +
                     std::to_string(X.rows()) + " rows of X");
  }
  LambdaSequence lambda;
  if (!o.lambda_path.empty()) {
    lambda = load_lambda(o.lambda_path);
    if (lambda.size() != X.cols()) {
      throw ParseError(o.lambda_path + ": length " + std::to_string(lambda.size()) + " does not match " +
                       std::to_string(X.cols()) + " columns of X");
    }
  } else {
    lambda = sequence_from_options(o, X.rows(), X.cols()).lambda;
  }

  const ProblemInstance prob = make_problem(std::move(X), y, lambda);
  SolverConfig sc;
  sc.gap_tol = o.gap_tol;
  sc.infeas_tol = o.infeas_tol;
  sc.max_iters = o.max_iters;
  SolverResult r;
  if (o.solver_name == "fista") r = fista_solve(prob, sc);
  else if (o.solver_name == "pg") r = prox_gradient_solve(prob, sc);
  else throw ConfigError("unknown solver '" + o.solver_name + "'");

  emit(o.out_path, out, [&](std::ostream& s) { write_csv_vector(s, r.b, "b"); });
  const Json report = {{"objective", r.objective}, {"gap", r.gap},           {"infeasibility", r.infeasibility},
                       {"gap_tol", r.gap_tol},     {"infeas_tol", r.infeas_tol}, {"iters", r.iters},
                       {"termination", to_string(r.termination)}};
  if (!o.report_path.empty()) emit(o.report_path, out, [&](std::ostream& s) { s << report.dump(2) << '\n'; });
  err << "solve: " << to_string(r.termination) << " after " << r.iters << " iterations, gap "
      << format_real(r.gap) << ", infeasibility " << format_real(r.infeasibility) << '\n';
  return r.converged() ? exit_ok : exit_nonconvergence;
}

inline int cmd_lambda(const Options& o, std::ostream& out, std::ostream& err) {
  Json cfg = {{"p", o.p}, {"q", o.q}, {"kind", o.kind}};
  if (o.kind != "bh") cfg["n"] = o.n;
  if (o.kind == "bhc-gaussian" || o.kind == "bhc_gaussian") {
    cfg["denominator"] = o.denominator;
    cfg["variant"] = o.variant;
  }
  if (!o.weights_path.empty()) cfg["weights"] = o.weights_path;
  print_resolved(err, "lambda", cfg);
  if (o.p < 1) throw ConfigError("--p must be at least 1");
  const CorrectedSequence seq = sequence_from_options(o, o.n, o.p);
  emit(o.out_path, out, [&](std::ostream& s) { write_sequence_csv(s, seq.lambda); });
  err << "k_star: " << seq.k_star << '\n';
  if (!o.summary_path.empty()) {
    const Json summary = {{"kind", o.kind}, {"p", o.p}, {"q", o.q}, {"k_star", seq.k_star},
                          {"lambda_1", seq.lambda.front()}, {"lambda_p", seq.lambda[seq.lambda.size() - 1]}};
    emit(o.summary_path, out, [&](std::ostream& s) { s << summary.dump(2) << '\n'; });
  }
  return exit_ok;
}

inline int cmd_weights(const Options& o, std::ostream& out, std::ostream& err) {
  DesignSpec spec;
  spec.kind = parse_design_kind(o.design);
  spec.n = o.n;
  spec.p = o.p;
  spec.rho = o.rho;
  spec.seed = derive_seed(o.seed, 0xD35167ULL);
  const std::vector<Index> ks = o.ks.empty() ? weight_sampling_grid(o.n, o.p) : o.ks;
  WeightSamplingConfig wc;
  wc.seed = o.seed;
  wc.initial_samples = o.initial_samples;
  wc.rel_tol = o.rel_tol;
  wc.threads = o.threads;
  print_resolved(err, "weights",
                 {{"design", to_string(spec.kind)}, {"n", o.n}, {"p", o.p}, {"rho", o.rho}, {"seed", o.seed},
                  {"ks", ks}, {"initial_samples", wc.initial_samples}, {"rel_tol", wc.rel_tol},
                  {"max_samples_small_k", wc.max_samples_small_k}, {"max_samples_large_k", wc.max_samples_large_k}});
  const MatrixXd X = to_dense(make_design(spec));
  const WeightTable table = estimate_weights(X, ks, wc);
  emit(o.out_path, out, [&](std::ostream& s) { table.write_csv(s); });
  std::size_t resampled = 0;
  for (const auto& e : table.entries()) resampled += e.resampled;
  err << "weights: " << table.entries().size() << " support sizes, " << resampled << " supports resampled\n";
  return exit_ok;
}

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  LoadedConfig loaded = load_config(o.config_path);
  if (o.threads != 0) loaded.config.threads = o.threads;
  print_resolved(err, "simulate", to_json(loaded));
  const ExperimentReport report = run_experiment(loaded.config);
  emit(o.out_path, out, [&](std::ostream& s) { write_report_csv(s, report); });
  if (!o.summary_path.empty()) {
    emit(o.summary_path, out, [&](std::ostream& s) { s << report_summary(loaded, report).dump(2) << '\n'; });
  }
  err << "simulate: mean FDP " << format_real(report.fdr.mean) << " (se " << format_real(report.fdr.std_error)
      << "), mean TPP " << format_real(report.tpp.mean) << ", failures " << report.failures << '\n';
  return exit_ok;
}

inline int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<double> eps = o.epsilons;
  if (eps.empty()) {
    if (o.eps_steps < 1 || !(o.eps_min > 0.0) || !(o.eps_max < 1.0) || o.eps_min > o.eps_max) {
      throw ConfigError("predict: need 0 < eps-min <= eps-max < 1 and eps-steps >= 1");
    }
    for (std::size_t i = 0; i < o.eps_steps; ++i) {
      eps.push_back(o.eps_steps == 1 ? o.eps_min
                                     : o.eps_min + (o.eps_max - o.eps_min) * static_cast<double>(i) /
                                                       static_cast<double>(o.eps_steps - 1));
    }
  }
  const std::vector<double> deltas = o.deltas.empty() ? std::vector<double>{0.5, 1.0, 2.0} : o.deltas;
  print_resolved(err, "predict", {{"epsilons", eps}, {"deltas", deltas}});
  const std::vector<HighSnrPrediction> rows = high_snr_sweep(eps, deltas, o.threads);
  for (const auto& r : rows) {
    if (r.residual > 1e-8) throw NonconvergenceError("predict: residual above 1e-8");
  }
  emit(o.out_path, out, [&](std::ostream& s) { write_prediction_csv(s, rows); });
  return exit_ok;
}

}  // namespace cli_detail

/// Parses argv and runs one subcommand.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using cli_detail::Options;
  Options o;
  CLI::App app{"SLOPE: sorted L1 penalized estimation"};
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);

  auto* prox = app.add_subcommand("prox", "Evaluate the sorted L1 prox of a vector");
  prox->add_option("--y", o.y_path, "CSV/SLP1 vector y")->required();
  prox->add_option("--lambda", o.lambda_path, "CSV/SLP1 vector lambda")->required();
  prox->add_option("--out", o.out_path, "Output CSV (default: stdout)");

  auto* solve = app.add_subcommand("solve", "Solve a SLOPE problem with FISTA or proximal gradient");
  solve->add_option("--X", o.x_path, "Design matrix (CSV or SLP1)")->required();
  solve->add_option("--y", o.y_path, "Response vector")->required();
  solve->add_option("--lambda", o.lambda_path, "Lambda vector (otherwise built from --kind/--q)");
  solve->add_option("--kind", o.kind, "bh | bhc-gaussian | bhc-weighted");
  solve->add_option("--q", o.q, "Target FDR level");
  solve->add_option("--weights", o.weights_path, "Weight table for bhc-weighted");
  solve->add_option("--n", o.declared_n, "Declared row count (cross-checked)");
  solve->add_option("--p", o.declared_p, "Declared column count (cross-checked)");
  solve->add_option("--solver", o.solver_name, "fista | pg");
  solve->add_option("--gap-tol", o.gap_tol, "Duality gap tolerance");
  solve->add_option("--infeas-tol", o.infeas_tol, "Dual infeasibility tolerance");
  solve->add_option("--max-iters", o.max_iters, "Iteration limit");
  solve->add_option("--out", o.out_path, "Estimate CSV (default: stdout)");
  solve->add_option("--report", o.report_path, "Gap report JSON");

  auto* lambda = app.add_subcommand("lambda", "Emit a regularization sequence");
  lambda->add_option("--p", o.p, "Number of coefficients")->required();
  lambda->add_option("--q", o.q, "Target FDR level")->required();
  lambda->add_option("--n", o.n, "Number of observations (corrected kinds)");
  lambda->add_option("--kind", o.kind, "bh | bhc-gaussian | bhc-weighted");
  lambda->add_option("--weights", o.weights_path, "Weight table CSV for bhc-weighted");
  lambda->add_option("--denominator", o.denominator, "n-i+1 | n-i | n-i-1");
  lambda->add_option("--variant", o.variant, "bh | recursive");
  lambda->add_option("--out", o.out_path, "Output CSV (default: stdout)");
  lambda->add_option("--summary", o.summary_path, "JSON summary with k_star");

  auto* weights = app.add_subcommand("weights", "Monte-Carlo weights for a design");
  weights->add_option("--design", o.design, "gaussian_iid | orthogonal | dct_restricted | equicorrelated_whitened");
  weights->add_option("--n", o.n, "Rows")->required();
  weights->add_option("--p", o.p, "Columns")->required();
  weights->add_option("--rho", o.rho, "Correlation for equicorrelated_whitened");
  weights->add_option("--seed", o.seed, "Master seed");
  weights->add_option("--ks", o.ks, "Support sizes (default: sampling grid)")->delimiter(',');
  weights->add_option("--initial-samples", o.initial_samples, "Initial Monte-Carlo batch");
  weights->add_option("--rel-tol", o.rel_tol, "Relative tolerance of the doubling scheme");
  weights->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  weights->add_option("--out", o.out_path, "Output CSV (default: stdout)");

  auto* simulate = app.add_subcommand("simulate", "Run a replicated experiment from a JSON config");
  simulate->add_option("--config", o.config_path, "Experiment JSON")->required();
  simulate->add_option("--out", o.out_path, "Per-replication CSV (default: stdout)");
  simulate->add_option("--summary", o.summary_path, "Aggregate JSON");
  simulate->add_option("--threads", o.threads, "Worker threads (0 = config or all cores)");

  auto* predict = app.add_subcommand("predict", "High-SNR lasso FDR predictions over (epsilon, delta)");
  predict->add_option("--epsilons", o.epsilons, "Explicit epsilon grid")->delimiter(',');
  predict->add_option("--eps-min", o.eps_min, "Smallest epsilon");
  predict->add_option("--eps-max", o.eps_max, "Largest epsilon");
  predict->add_option("--eps-steps", o.eps_steps, "Number of epsilon values");
  predict->add_option("--deltas", o.deltas, "Delta grid")->delimiter(',');
  predict->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  predict->add_option("--out", o.out_path, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::CallForVersion&) {
    out << version << '\n';
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_bad_args;
  }

  try {
    if (*prox) return cli_detail::cmd_prox(o, out, err);
    if (*solve) return cli_detail::cmd_solve(o, out, err);
    if (*lambda) return cli_detail::cmd_lambda(o, out, err);
    if (*weights) return cli_detail::cmd_weights(o, out, err);
    if (*simulate) return cli_detail::cmd_simulate(o, out, err);
    if (*predict) return cli_detail::cmd_predict(o, out, err);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return exit_parse;
  } catch (const NonconvergenceError& e) {
    err << "nonconvergence: " << e.what() << '\n';
    return exit_nonconvergence;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_bad_args;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return exit_bad_args;
  } catch (const DimensionError& e) {
    err << "parse error: " << e.what() << '\n';
    return exit_parse;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return exit_invariant;
  }
  return exit_bad_args;
}

}  // namespace slope
