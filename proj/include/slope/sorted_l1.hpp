#pragma once

// The sorted L1 norm J_λ(b) = Σ λ_i |b|_(i), its dual ball C_λ, and the
// proximal operator
//
//     prox_λ(y) = argmin_x ½‖y − x‖² + J_λ(x).
//
// After sorting |y| in decreasing order the prox is the positive part of the
// nonincreasing isotonic fit of y − λ. Two solvers are provided for the sorted
// problem: a block-averaging reference and the O(n) stack algorithm. They are
// kept independent of each other so one can serve as an oracle for the other.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "slope/errors.hpp"

namespace slope {

using Eigen::Index;
using Eigen::VectorXd;

/// Regularization weights λ_1 ≥ λ_2 ≥ … ≥ λ_p ≥ 0 with λ_1 > 0.
class LambdaSequence {
 public:
  LambdaSequence() = default;

  explicit LambdaSequence(VectorXd values) : values_(std::move(values)) { validate(); }

  static LambdaSequence constant(Index p, double value) {
    return LambdaSequence(VectorXd::Constant(p, value));
  }

  Index size() const { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }
  double front() const { return values_[0]; }
  const VectorXd& values() const { return values_; }

  LambdaSequence scaled(double factor) const {
    LambdaSequence out;
    out.values_ = values_ * factor;
    out.validate();
    return out;
  }

 private:
  void validate() const {
    if (values_.size() == 0) throw ContractError("LambdaSequence: empty");
    for (Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) throw ContractError("LambdaSequence: non-finite entry");
      if (i + 1 < values_.size() && values_[i] < values_[i + 1]) {
        throw ContractError("LambdaSequence: not nonincreasing at index " + std::to_string(i));
      }
    }
    if (values_[values_.size() - 1] < 0.0) throw ContractError("LambdaSequence: negative entry");
    if (!(values_[0] > 0.0)) throw ContractError("LambdaSequence: lambda_1 must be positive");
  }

  VectorXd values_;
};

/// |y| sorted in decreasing order, plus what is needed to undo the sort.
struct SortedProxInput {
  VectorXd magnitudes;              ///< nonincreasing, nonnegative
  std::vector<Index> permutation;   ///< permutation[k] = original index of magnitudes[k]
  VectorXd signs;                   ///< ±1 per original index; zeros get +1

  /// Maps a vector in the sorted frame back to the original order and signs.
  VectorXd restore(const VectorXd& sorted) const {
    VectorXd out(sorted.size());
    for (Index k = 0; k < sorted.size(); ++k) {
      const Index i = permutation[static_cast<std::size_t>(k)];
      out[i] = signs[i] * sorted[k];
    }
    return out;
  }
};

/// Stable descending sort of |y|; ties keep original index order.
inline SortedProxInput sort_for_prox(const VectorXd& y) {
  SortedProxInput in;
  const Index n = y.size();
  in.permutation.resize(static_cast<std::size_t>(n));
  std::iota(in.permutation.begin(), in.permutation.end(), Index{0});
  std::stable_sort(in.permutation.begin(), in.permutation.end(),
                   [&](Index a, Index b) { return std::abs(y[a]) > std::abs(y[b]); });
  in.magnitudes.resize(n);
  in.signs.resize(n);
  for (Index k = 0; k < n; ++k) in.magnitudes[k] = std::abs(y[in.permutation[static_cast<std::size_t>(k)]]);
  for (Index i = 0; i < n; ++i) in.signs[i] = y[i] < 0.0 ? -1.0 : 1.0;
  return in;
}

namespace detail {

inline VectorXd sorted_abs_desc(const VectorXd& v) {
  VectorXd a = v.cwiseAbs();
  std::sort(a.data(), a.data() + a.size(), std::greater<>());
  return a;
}

inline void require_sorted_magnitudes(const VectorXd& y, const char* who) {
  for (Index i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0)) throw ContractError(std::string(who) + ": input must be nonnegative");
    if (i + 1 < y.size() && y[i] < y[i + 1]) {
      throw ContractError(std::string(who) + ": input must be nonincreasing");
    }
  }
}

}  // namespace detail

/// J_λ(b) = Σ λ_i |b|_(i).
inline double sorted_l1_norm(const VectorXd& b, const LambdaSequence& lambda) {
  detail::require_same_size(b.size(), lambda.size(), "sorted_l1_norm");
  return detail::sorted_abs_desc(b).dot(lambda.values());
}

/// max{0, max_i Σ_{j≤i} (|w|_(j) − λ_j)}. Zero iff w lies in the dual ball C_λ.
inline double dual_infeasibility(const VectorXd& w, const LambdaSequence& lambda) {
  detail::require_same_size(w.size(), lambda.size(), "dual_infeasibility");
  const VectorXd a = detail::sorted_abs_desc(w);
  double partial = 0.0;
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    partial += a[i] - lambda[i];
    worst = std::max(worst, partial);
  }
  return worst;
}

/// One block of the stack algorithm: indices [first, last], the running sum of
/// y − λ over the block, and the clamped block average.
struct BlockTuple {
  Index first;
  Index last;
  double sum;
  double level;
};

/// Reference prox on sorted input: repeatedly average every maximal strictly
/// increasing run of y − λ until it is nonincreasing, then take the positive part.
///
/// Averaging is done on pooled blocks, so values equalised in one pass move
/// together in later passes; each pass removes at least one block, which bounds
/// the number of passes by n.
inline VectorXd prox_reference_averaging(const VectorXd& y, const LambdaSequence& lambda) {
  detail::require_same_size(y.size(), lambda.size(), "prox_reference_averaging");
  detail::require_sorted_magnitudes(y, "prox_reference_averaging");
  const Index n = y.size();

  struct Block {
    Index first, last;
    double sum_y, sum_lambda;
    double value() const { return (sum_y - sum_lambda) / static_cast<double>(last - first + 1); }
  };
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) blocks.push_back({i, i, y[i], lambda[i]});

  for (Index pass = 0; pass <= n; ++pass) {
    bool monotone = true;
    for (std::size_t b = 0; b + 1 < blocks.size(); ++b) {
      if (blocks[b].value() < blocks[b + 1].value()) {
        monotone = false;
        break;
      }
    }
    if (monotone) break;

    std::vector<Block> next;
    next.reserve(blocks.size());
    std::size_t b = 0;
    while (b < blocks.size()) {
      Block merged = blocks[b];
      std::size_t e = b;
      while (e + 1 < blocks.size() && blocks[e].value() < blocks[e + 1].value()) {
        ++e;
        merged.last = blocks[e].last;
        merged.sum_y += blocks[e].sum_y;
        merged.sum_lambda += blocks[e].sum_lambda;
      }
      next.push_back(merged);
      b = e + 1;
    }
    blocks.swap(next);
  }

  VectorXd x(n);
  for (const Block& blk : blocks) {
    const double v = std::max(0.0, blk.value());
    for (Index k = blk.first; k <= blk.last; ++k) x[k] = v;
  }
  return x;
}

/// Scratch space for repeated prox calls; keeps the block stack allocated.
struct ProxWorkspace {
  std::vector<BlockTuple> stack;
};

/// Stack-based O(n) prox on sorted input, written into x. Each new coordinate is
/// pushed as its own block and merged backwards while the previous block level
/// does not exceed the current one.
inline void prox_stack_into(const VectorXd& y, const LambdaSequence& lambda, ProxWorkspace& ws, VectorXd& x) {
  detail::require_same_size(y.size(), lambda.size(), "prox_stack");
  detail::require_sorted_magnitudes(y, "prox_stack");
  const Index n = y.size();

  std::vector<BlockTuple>& stack = ws.stack;
  stack.clear();
  stack.reserve(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    const double s = y[k] - lambda[k];
    stack.push_back({k, k, s, std::max(0.0, s)});
    while (stack.size() > 1 && stack[stack.size() - 2].level <= stack.back().level) {
      const BlockTuple top = stack.back();
      stack.pop_back();
      BlockTuple& prev = stack.back();
      prev.last = top.last;
      prev.sum += top.sum;
      prev.level = std::max(0.0, prev.sum / static_cast<double>(prev.last - prev.first + 1));
    }
  }

  x.resize(n);
  for (const BlockTuple& blk : stack) {
    for (Index k = blk.first; k <= blk.last; ++k) x[k] = blk.level;
  }
}

inline VectorXd prox_stack(const VectorXd& y, const LambdaSequence& lambda) {
  ProxWorkspace ws;
  VectorXd x;
  prox_stack_into(y, lambda, ws, x);
  return x;
}

/// Full prox of the sorted L1 norm for arbitrary y.
inline VectorXd prox_sorted_l1(const VectorXd& y, const LambdaSequence& lambda) {
  detail::require_same_size(y.size(), lambda.size(), "prox_sorted_l1");
  const SortedProxInput in = sort_for_prox(y);
  return in.restore(prox_stack(in.magnitudes, lambda));
}

/// Result of checking the KKT conditions of the sorted prox QP
///   minimize ½‖y − x‖² + Σ λ_i x_i  s.t.  x_1 ≥ … ≥ x_n ≥ 0.
struct KktCertificate {
  VectorXd x;
  VectorXd mu;                  ///< multipliers rebuilt from stationarity, μ_0 = 0
  double primal = 0.0;          ///< max violation of x_i ≥ x_{i+1}, x_n ≥ 0
  double dual = 0.0;            ///< max(−μ_i, 0)
  double complementarity = 0.0; ///< max |min(μ_i, x_i − x_{i+1})|
  double stationarity = 0.0;    ///< max |x_i − y_i + λ_i − (μ_i − μ_{i−1})|
  double max_violation = 0.0;

  bool valid(double tolerance) const { return max_violation <= tolerance; }
};

/// Certifies a candidate solution of the sorted prox problem. The multipliers
/// are rebuilt from the stationarity recursion; complementary slackness is
/// measured with the min-function |min(μ_i, x_i − x_{i+1})| so that its scale
/// matches the other residuals. Violations are reported, never thrown.
inline KktCertificate kkt_verify(const VectorXd& y, const LambdaSequence& lambda, const VectorXd& x) {
  detail::require_same_size(y.size(), lambda.size(), "kkt_verify");
  detail::require_same_size(x.size(), y.size(), "kkt_verify");
  const Index n = y.size();

  KktCertificate cert;
  cert.x = x;
  cert.mu.resize(n);
  double prev_mu = 0.0;
  for (Index i = 0; i < n; ++i) {
    cert.mu[i] = prev_mu + x[i] - y[i] + lambda[i];
    prev_mu = cert.mu[i];
  }

  prev_mu = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double next_x = i + 1 < n ? x[i + 1] : 0.0;
    const double gap = x[i] - next_x;
    cert.primal = std::max(cert.primal, -gap);
    cert.dual = std::max(cert.dual, -cert.mu[i]);
    cert.complementarity = std::max(cert.complementarity, std::abs(std::min(cert.mu[i], gap)));
    cert.stationarity =
        std::max(cert.stationarity, std::abs(x[i] - y[i] + lambda[i] - (cert.mu[i] - prev_mu)));
    prev_mu = cert.mu[i];
  }
  cert.max_violation = std::max({cert.primal, cert.dual, cert.complementarity, cert.stationarity});
  return cert;
}

}  // namespace slope
