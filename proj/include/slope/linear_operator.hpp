#pragma once

// Design matrices seen by the solvers: anything that can apply X and Xᵀ.

#include <Eigen/Dense>
#include <fftw3.h>

#include <cmath>
#include <concepts>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "slope/errors.hpp"

namespace slope {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

template <class Op>
concept LinearOperator = requires(const Op& op, const VectorXd& v) {
  { op.rows() } -> std::convertible_to<Index>;
  { op.cols() } -> std::convertible_to<Index>;
  { op.apply(v) } -> std::convertible_to<VectorXd>;
  { op.apply_adjoint(v) } -> std::convertible_to<VectorXd>;
};

/// Immutable dense matrix, shared between copies.
class DenseOperator {
 public:
  DenseOperator() : matrix_(std::make_shared<const MatrixXd>()) {}
  explicit DenseOperator(MatrixXd X) : matrix_(std::make_shared<const MatrixXd>(std::move(X))) {}
  explicit DenseOperator(std::shared_ptr<const MatrixXd> X) : matrix_(std::move(X)) {}

  Index rows() const { return matrix_->rows(); }
  Index cols() const { return matrix_->cols(); }
  VectorXd apply(const VectorXd& b) const { return *matrix_ * b; }
  VectorXd apply_adjoint(const VectorXd& r) const { return matrix_->transpose() * r; }
  const MatrixXd& matrix() const { return *matrix_; }

 private:
  std::shared_ptr<const MatrixXd> matrix_;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

using FftwPlan = std::shared_ptr<fftw_plan_s>;

// Caller holds the planner mutex.
inline FftwPlan make_r2r_plan(Index p, fftw_r2r_kind kind) {
  std::vector<double> a(static_cast<std::size_t>(p)), b(static_cast<std::size_t>(p));
  fftw_plan plan = fftw_plan_r2r_1d(static_cast<int>(p), a.data(), b.data(), kind,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
  return FftwPlan(plan, [](fftw_plan_s* pl) {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(pl);
  });
}

}  // namespace detail

/// Rows `rows` of the orthonormal p×p DCT-II matrix, scaled by `scale`, applied
/// matrix-free through FFTW. apply() is a forward DCT-II followed by row
/// selection; apply_adjoint() scatters into a length-p vector and runs the
/// orthonormal DCT-III. Plans are created once and shared by copies;
/// execution is thread-safe.
class DctOperator {
 public:
  DctOperator(Index p, std::vector<Index> rows, double scale)
      : p_(p), rows_(std::move(rows)), scale_(scale) {
    if (p <= 0) throw DimensionError("DctOperator: p must be positive");
    for (Index r : rows_) {
      if (r < 0 || r >= p) throw DimensionError("DctOperator: row index out of range");
    }
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_ = detail::make_r2r_plan(p, FFTW_REDFT10);
    inverse_ = detail::make_r2r_plan(p, FFTW_REDFT01);
  }

  Index rows() const { return static_cast<Index>(rows_.size()); }
  Index cols() const { return p_; }
  const std::vector<Index>& selected_rows() const { return rows_; }
  double scale() const { return scale_; }

  VectorXd apply(const VectorXd& b) const {
    if (b.size() != p_) throw DimensionError("DctOperator::apply: length mismatch");
    VectorXd in = b;
    VectorXd full(p_);
    fftw_execute_r2r(forward_.get(), in.data(), full.data());
    VectorXd out(rows());
    for (Index k = 0; k < rows(); ++k) {
      const Index r = rows_[static_cast<std::size_t>(k)];
      out[k] = scale_ * coefficient(r) * 0.5 * full[r];
    }
    return out;
  }

  VectorXd apply_adjoint(const VectorXd& r) const {
    if (r.size() != rows()) throw DimensionError("DctOperator::apply_adjoint: length mismatch");
    VectorXd spectrum = VectorXd::Zero(p_);
    for (Index k = 0; k < rows(); ++k) {
      const Index row = rows_[static_cast<std::size_t>(k)];
      spectrum[row] += scale_ * r[k];
    }
    // REDFT01 computes Y_n = X_0 + 2 Σ_{k≥1} X_k cos(πk(2n+1)/2p).
    spectrum[0] *= coefficient(0);
    for (Index k = 1; k < p_; ++k) spectrum[k] *= 0.5 * coefficient(k);
    VectorXd out(p_);
    fftw_execute_r2r(inverse_.get(), spectrum.data(), out.data());
    return out;
  }

  /// Dense equivalent, for tests and small problems.
  MatrixXd to_dense() const {
    MatrixXd X(rows(), p_);
    for (Index k = 0; k < rows(); ++k) {
      const Index r = rows_[static_cast<std::size_t>(k)];
      for (Index j = 0; j < p_; ++j) {
        X(k, j) = scale_ * coefficient(r) *
                  std::cos(std::numbers::pi * static_cast<double>(r) * (2.0 * static_cast<double>(j) + 1.0) /
                           (2.0 * static_cast<double>(p_)));
      }
    }
    return X;
  }

 private:
  double coefficient(Index k) const {
    return k == 0 ? std::sqrt(1.0 / static_cast<double>(p_)) : std::sqrt(2.0 / static_cast<double>(p_));
  }

  Index p_;
  std::vector<Index> rows_;
  double scale_;
  detail::FftwPlan forward_;
  detail::FftwPlan inverse_;
};

/// Columns `cols` of the operator as a dense matrix (one adjoint-free apply per column).
template <LinearOperator Op>
MatrixXd operator_columns(const Op& op, const std::vector<Index>& cols) {
  MatrixXd out(op.rows(), static_cast<Index>(cols.size()));
  VectorXd e = VectorXd::Zero(op.cols());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    e[cols[k]] = 1.0;
    out.col(static_cast<Index>(k)) = op.apply(e);
    e[cols[k]] = 0.0;
  }
  return out;
}

inline MatrixXd operator_columns(const DenseOperator& op, const std::vector<Index>& cols) {
  MatrixXd out(op.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = op.matrix().col(cols[k]);
  return out;
}

}  // namespace slope
