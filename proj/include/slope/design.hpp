#pragma once

// Design matrices for simulations.
//
//   orthogonal               n ≥ p, orthonormal columns (identity when n = p)
//   gaussian_iid             i.i.d. N(0, 1/n) entries, redrawn every replication
//   dct_restricted           n rows of the orthonormal DCT-II (row 0 always kept),
//                            scaled by √(p/n); matrix-free
//   equicorrelated_whitened  Σ^{-1/2} for Σ = (1−ρ)I + ρ11ᵀ, unit-norm columns

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "slope/errors.hpp"
#include "slope/linear_operator.hpp"
#include "slope/rng.hpp"

namespace slope {

enum class DesignKind { orthogonal, gaussian_iid, dct_restricted, equicorrelated_whitened };

inline const char* to_string(DesignKind k) {
  switch (k) {
    case DesignKind::orthogonal: return "orthogonal";
    case DesignKind::gaussian_iid: return "gaussian_iid";
    case DesignKind::dct_restricted: return "dct_restricted";
    case DesignKind::equicorrelated_whitened: return "equicorrelated_whitened";
  }
  return "unknown";
}

struct DesignSpec {
  DesignKind kind = DesignKind::orthogonal;
  Index n = 0;
  Index p = 0;
  std::uint64_t seed = 1;
  double rho = 0.5;  ///< equicorrelated_whitened only
};

/// Whether the same matrix serves every replication of an experiment.
inline bool design_is_fixed(DesignKind k) { return k != DesignKind::gaussian_iid; }

/// Whether XᵀX = I, so SLOPE reduces to a single prox of Xᵀy.
inline bool design_is_orthogonal(DesignKind k) { return k == DesignKind::orthogonal; }

using Design = std::variant<DenseOperator, DctOperator>;

inline Index design_rows(const Design& d) {
  return std::visit([](const auto& op) { return op.rows(); }, d);
}
inline Index design_cols(const Design& d) {
  return std::visit([](const auto& op) { return op.cols(); }, d);
}

inline MatrixXd to_dense(const Design& d) {
  if (const auto* dense = std::get_if<DenseOperator>(&d)) return dense->matrix();
  return std::get<DctOperator>(d).to_dense();
}

/// Diagonal and off-diagonal entries of Σ^{-1/2} for the equicorrelated Σ, from
/// its eigenstructure: eigenvalue 1 + (p−1)ρ on 1 and 1 − ρ on its complement.
struct EquicorrelatedRoot {
  double diagonal;
  double off_diagonal;
};

inline EquicorrelatedRoot equicorrelated_inverse_sqrt(Index p, double rho) {
  if (p < 1) throw DimensionError("equicorrelated design: p must be positive");
  const double pd = static_cast<double>(p);
  if (!(rho > -1.0 / (pd - 1.0) || p == 1) || !(rho < 1.0)) {
    throw DomainError("equicorrelated design: rho outside the positive-definite range");
  }
  const double a = 1.0 / std::sqrt(1.0 - rho);
  const double b = 1.0 / std::sqrt(1.0 + (pd - 1.0) * rho);
  return {a * (1.0 - 1.0 / pd) + b / pd, (b - a) / pd};
}

namespace detail {

inline void require_design_dims(const DesignSpec& s) {
  if (s.n < 1 || s.p < 1) throw DimensionError("make_design: n and p must be positive");
  switch (s.kind) {
    case DesignKind::orthogonal:
      if (s.n < s.p) throw DimensionError("make_design: orthogonal design needs n >= p");
      break;
    case DesignKind::dct_restricted:
      if (s.n > s.p) throw DimensionError("make_design: dct_restricted needs n <= p");
      break;
    case DesignKind::equicorrelated_whitened:
      if (s.n != s.p) throw DimensionError("make_design: equicorrelated_whitened needs n == p");
      break;
    case DesignKind::gaussian_iid:
      break;
  }
}

}  // namespace detail

inline MatrixXd gaussian_design(Index n, Index p, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd X(n, p);
  const double sd = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < n; ++i) X(i, j) = sd * rng.normal();
  }
  return X;
}

/// Row indices for the restricted DCT: 0 plus n−1 distinct rows from 1..p−1, sorted.
inline std::vector<Index> dct_rows(Index n, Index p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Index> rows = rng.sample_without_replacement(p - 1, n - 1);
  for (Index& r : rows) ++r;
  rows.push_back(0);
  std::sort(rows.begin(), rows.end());
  return rows;
}

/// The design for `spec`; `seed` overrides spec.seed (used for per-replication draws).
inline Design make_design(const DesignSpec& spec, std::uint64_t seed) {
  detail::require_design_dims(spec);
  const Index n = spec.n, p = spec.p;
  switch (spec.kind) {
    case DesignKind::orthogonal: {
      if (n == p) return DenseOperator(MatrixXd::Identity(n, p));
      Eigen::HouseholderQR<MatrixXd> qr(gaussian_design(n, p, seed));
      MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, p);
      return DenseOperator(std::move(Q));
    }
    case DesignKind::gaussian_iid:
      return DenseOperator(gaussian_design(n, p, seed));
    case DesignKind::dct_restricted:
      return DctOperator(p, dct_rows(n, p, seed),
                         std::sqrt(static_cast<double>(p) / static_cast<double>(n)));
    case DesignKind::equicorrelated_whitened: {
      const EquicorrelatedRoot r = equicorrelated_inverse_sqrt(p, spec.rho);
      MatrixXd W = MatrixXd::Constant(p, p, r.off_diagonal);
      W.diagonal().setConstant(r.diagonal);
      const double col_norm = std::sqrt(r.diagonal * r.diagonal +
                                        static_cast<double>(p - 1) * r.off_diagonal * r.off_diagonal);
      W /= col_norm;
      return DenseOperator(std::move(W));
    }
  }
  throw ConfigError("make_design: unknown design kind");
}

inline Design make_design(const DesignSpec& spec) { return make_design(spec, spec.seed); }

}  // namespace slope
