#pragma once

// Multiple testing with sorted statistics: BHq step-up and step-down, SLOPE
// used as a test, the FDR hard-thresholding estimator, least-squares
// debiasing on a selected support, and error/power bookkeeping.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "slope/errors.hpp"
#include "slope/lambda_seq.hpp"
#include "slope/linear_operator.hpp"
#include "slope/sorted_l1.hpp"

namespace slope {

/// Hypotheses rejected by a procedure. `rejected` lists original indices in
/// decreasing order of |z|; they are the threshold_index largest magnitudes.
struct RejectionSet {
  std::vector<Index> rejected;
  Index threshold_index = 0;

  Index count() const { return static_cast<Index>(rejected.size()); }
};

namespace detail {

inline RejectionSet top_magnitudes(const std::vector<Index>& order, Index count) {
  RejectionSet out;
  out.threshold_index = count;
  out.rejected.assign(order.begin(), order.begin() + count);
  return out;
}

inline std::vector<Index> magnitude_order(const VectorXd& z) { return sort_for_prox(z).permutation; }

inline void require_test_inputs(const VectorXd& z, Index p, double q, const char* who) {
  require_same_size(z.size(), p, who);
  require_level(q, who);
}

}  // namespace detail

/// Largest i with |z|_(i) > λ_BH(i); rejects the i largest magnitudes.
inline RejectionSet step_up(const VectorXd& z, Index p, double q) {
  detail::require_test_inputs(z, p, q, "step_up");
  const std::vector<Index> order = detail::magnitude_order(z);
  Index cut = 0;
  for (Index i = p; i >= 1; --i) {
    if (std::abs(z[order[static_cast<std::size_t>(i - 1)]]) > lambda_bh_at(i, p, q)) {
      cut = i;
      break;
    }
  }
  return detail::top_magnitudes(order, cut);
}

/// (Smallest i with |z|_(i) ≤ λ_BH(i)) − 1, or p when there is none.
inline RejectionSet step_down(const VectorXd& z, Index p, double q) {
  detail::require_test_inputs(z, p, q, "step_down");
  const std::vector<Index> order = detail::magnitude_order(z);
  Index cut = p;
  for (Index i = 1; i <= p; ++i) {
    if (std::abs(z[order[static_cast<std::size_t>(i - 1)]]) <= lambda_bh_at(i, p, q)) {
      cut = i - 1;
      break;
    }
  }
  return detail::top_magnitudes(order, cut);
}

/// Indices with |b_i| > zero_tol, ordered by decreasing |b_i|.
inline RejectionSet select_support(const VectorXd& b, double zero_tol = 0.0) {
  const std::vector<Index> order = detail::magnitude_order(b);
  Index count = 0;
  while (count < b.size() && std::abs(b[order[static_cast<std::size_t>(count)]]) > zero_tol) ++count;
  return detail::top_magnitudes(order, count);
}

/// SLOPE in an orthogonal frame: reject where prox_λ(z) is nonzero. The prox
/// produces exact zeros, so no tolerance is applied.
inline RejectionSet slope_test(const VectorXd& z, const LambdaSequence& lambda) {
  detail::require_same_size(z.size(), lambda.size(), "slope_test");
  return select_support(prox_sorted_l1(z, lambda));
}

/// Zero tolerance applied to iterative solver output.
inline double solver_zero_tolerance(const LambdaSequence& lambda) { return 1e-10 * lambda.front(); }

struct FdrThresholdFit {
  VectorXd estimate;
  double threshold;
};

/// Hard thresholding at t = λ_BH(i_SU); with no step-up rejection the estimate
/// is zero and t = λ_BH(1).
inline FdrThresholdFit fdr_threshold_fit(const VectorXd& y, Index p, double q) {
  const RejectionSet su = step_up(y, p, q);
  FdrThresholdFit fit{VectorXd::Zero(p), lambda_bh_at(std::max<Index>(su.threshold_index, 1), p, q)};
  if (su.count() == 0) return fit;
  for (Index i = 0; i < p; ++i) {
    if (std::abs(y[i]) >= fit.threshold) fit.estimate[i] = y[i];
  }
  return fit;
}

inline VectorXd fdr_threshold_estimate(const VectorXd& y, Index p, double q) {
  return fdr_threshold_fit(y, p, q).estimate;
}

/// Least squares of y on the columns in `support`; zeros elsewhere.
inline VectorXd debias_columns(const MatrixXd& XS, const VectorXd& y, const std::vector<Index>& support, Index p) {
  detail::require_same_size(XS.rows(), y.size(), "debias: rows(X) vs length(y)");
  VectorXd out = VectorXd::Zero(p);
  if (support.empty()) return out;
  if (static_cast<Index>(support.size()) > XS.rows()) {
    throw SingularError("debias: support larger than the number of observations");
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(XS);
  if (qr.rank() < XS.cols()) throw SingularError("debias: restricted design is rank deficient");
  const VectorXd coef = qr.solve(y);
  for (std::size_t k = 0; k < support.size(); ++k) out[support[k]] = coef[static_cast<Index>(k)];
  return out;
}

inline VectorXd debias(const MatrixXd& X, const VectorXd& y, const std::vector<Index>& support) {
  MatrixXd XS(X.rows(), static_cast<Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (support[k] < 0 || support[k] >= X.cols()) throw DimensionError("debias: support index out of range");
    XS.col(static_cast<Index>(k)) = X.col(support[k]);
  }
  return debias_columns(XS, y, support, X.cols());
}

template <LinearOperator Op>
VectorXd debias(const Op& X, const VectorXd& y, const std::vector<Index>& support) {
  for (Index j : support) {
    if (j < 0 || j >= X.cols()) throw DimensionError("debias: support index out of range");
  }
  return debias_columns(operator_columns(X, support), y, support, X.cols());
}

struct ExperimentMetrics {
  Index V = 0;       ///< false rejections
  Index R = 0;       ///< rejections
  Index k = 0;       ///< true nonzeros
  double FDP = 0.0;  ///< V / max(R, 1)
  double TPP = 0.0;  ///< (R − V) / max(k, 1)
  double MSE = 0.0;  ///< mean squared coefficient error

  double power() const { return TPP; }
};

/// Support comparison of `selected` against the nonzeros of `truth`, plus the
/// coefficient error of `estimate`.
inline ExperimentMetrics metrics(const std::vector<Index>& selected, const VectorXd& estimate, const VectorXd& truth) {
  detail::require_same_size(estimate.size(), truth.size(), "metrics");
  ExperimentMetrics m;
  m.R = static_cast<Index>(selected.size());
  for (Index j : selected) {
    if (truth[j] == 0.0) ++m.V;
  }
  for (Index i = 0; i < truth.size(); ++i) {
    if (truth[i] != 0.0) ++m.k;
  }
  m.FDP = static_cast<double>(m.V) / static_cast<double>(std::max<Index>(m.R, 1));
  m.TPP = static_cast<double>(m.R - m.V) / static_cast<double>(std::max<Index>(m.k, 1));
  m.MSE = truth.size() == 0 ? 0.0 : (estimate - truth).squaredNorm() / static_cast<double>(truth.size());
  return m;
}

/// Supports are the nonzero entries of estimate and truth.
inline ExperimentMetrics metrics(const VectorXd& estimate, const VectorXd& truth) {
  detail::require_same_size(estimate.size(), truth.size(), "metrics");
  std::vector<Index> selected;
  for (Index i = 0; i < estimate.size(); ++i) {
    if (estimate[i] != 0.0) selected.push_back(i);
  }
  return metrics(selected, estimate, truth);
}

}  // namespace slope
