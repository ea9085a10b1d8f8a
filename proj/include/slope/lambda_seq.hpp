#pragma once

// Regularization sequences.
//
//   λ_BH(i)  = Φ^{-1}(1 − iq/2p)
//   λ_BHc    = λ_BH inflated by √(1 + Σ_{j<i} λ_BH(j)² · w_{i−1}) and held
//              constant after the first global minimum k* of the inflated
//              sequence.
//
// For Gaussian designs w is 1/(n − i + 1) by default; other designs use
// Monte-Carlo estimates of w_k = (1/k) E‖(X_Sᵀ X_S)^{-1} X_Sᵀ X_i‖².

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "slope/errors.hpp"
#include "slope/format.hpp"
#include "slope/normal.hpp"
#include "slope/parallel.hpp"
#include "slope/rng.hpp"
#include "slope/sorted_l1.hpp"

namespace slope {

using Eigen::MatrixXd;

namespace detail {

inline void require_level(double q, const char* who) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError(std::string(who) + ": q must lie in (0, 1)");
}

inline void require_positive_count(Index p, const char* who) {
  if (p < 1) throw DomainError(std::string(who) + ": p must be at least 1");
}

}  // namespace detail

/// λ_BH(i) for a single 1-based index i.
inline double lambda_bh_at(Index i, Index p, double q) {
  return normal_upper_quantile(static_cast<double>(i) * q / (2.0 * static_cast<double>(p)));
}

inline LambdaSequence lambda_bh(Index p, double q) {
  detail::require_positive_count(p, "lambda_bh");
  detail::require_level(q, "lambda_bh");
  VectorXd v(p);
  for (Index i = 0; i < p; ++i) v[i] = lambda_bh_at(i + 1, p, q);
  return LambdaSequence(std::move(v));
}

struct CorrectedSequence {
  LambdaSequence lambda;
  Index k_star = 0;   ///< 1-based position of the first global minimum of `uncapped`
  VectorXd uncapped;  ///< inflated values, as far as they are defined (may be shorter than p)
};

/// Denominator of the Gaussian variance correction at index i.
enum class CorrectionDenominator {
  n_minus_i_plus_1,  ///< default; gives k* = 91, 141, 279 at n = p = 5000
  n_minus_i,
  n_minus_i_minus_1,
};

/// Which values enter the running sum of squares.
enum class CorrectionVariant {
  bh_sum,         ///< Σ_{j<i} λ_BH(j)²
  corrected_sum,  ///< Σ_{j<i} λ_j², the recursive form
};

namespace detail {

// Truncates an inflated sequence at its first global minimum. `complete` is
// false when the inflation could not be evaluated all the way to p; then the
// sequence must have turned upward before the end of what was computed.
inline CorrectedSequence cap_at_minimum(VectorXd uncapped, Index p, bool complete, const char* who) {
  const Index m = uncapped.size();
  Index arg = 0;
  for (Index i = 1; i < m; ++i) {
    if (uncapped[i] < uncapped[arg]) arg = i;
  }
  if (!complete && arg + 1 >= m) {
    throw ConfigError(std::string(who) +
                      ": correction undefined beyond index " + std::to_string(m) +
                      " before a minimum was reached");
  }
  VectorXd capped(p);
  for (Index i = 0; i < p; ++i) capped[i] = i <= arg ? uncapped[i] : uncapped[arg];
  CorrectedSequence out;
  out.lambda = LambdaSequence(std::move(capped));
  out.k_star = arg + 1;
  out.uncapped = std::move(uncapped);
  return out;
}

}  // namespace detail

/// λ_BHc for an n×p Gaussian design.
inline CorrectedSequence lambda_bhc_gaussian(
    Index n, Index p, double q,
    CorrectionDenominator denominator = CorrectionDenominator::n_minus_i_plus_1,
    CorrectionVariant variant = CorrectionVariant::bh_sum) {
  detail::require_positive_count(p, "lambda_bhc_gaussian");
  detail::require_level(q, "lambda_bhc_gaussian");
  if (n < 2) throw ConfigError("lambda_bhc_gaussian: n must be at least 2");
  const Index offset = denominator == CorrectionDenominator::n_minus_i_plus_1 ? 1
                       : denominator == CorrectionDenominator::n_minus_i     ? 0
                                                                             : -1;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(p));
  double sum_sq = 0.0;
  bool complete = true;
  for (Index i = 1; i <= p; ++i) {
    const double bh = lambda_bh_at(i, p, q);
    if (i == 1) {
      values.push_back(bh);
    } else {
      const Index d = n - i + offset;
      if (d <= 0) {
        complete = false;
        break;
      }
      values.push_back(bh * std::sqrt(1.0 + sum_sq / static_cast<double>(d)));
    }
    sum_sq += variant == CorrectionVariant::bh_sum ? bh * bh : values.back() * values.back();
  }
  return detail::cap_at_minimum(Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size())),
                                p, complete, "lambda_bhc_gaussian");
}

/// Monte-Carlo weight estimate at one support size.
struct WeightEntry {
  Index k;
  double w_hat;
  std::size_t samples;
  double std_error = 0.0;   ///< standard error of w_hat
  std::size_t resampled = 0;  ///< ill-conditioned supports that were redrawn
};

/// Sampled weights with piecewise-linear interpolation in k.
class WeightTable {
 public:
  WeightTable() = default;

  explicit WeightTable(std::vector<WeightEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw ConfigError("WeightTable: no entries");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!(entries_[i].w_hat >= 0.0) || !std::isfinite(entries_[i].w_hat)) {
        throw ConfigError("WeightTable: weights must be finite and nonnegative");
      }
      if (i > 0 && entries_[i].k <= entries_[i - 1].k) {
        throw ConfigError("WeightTable: k values must be strictly increasing");
      }
    }
  }

  /// Constant table w(k) = value on [k_min, k_max], e.g. zero weights.
  static WeightTable constant(Index k_min, Index k_max, double value) {
    if (k_min == k_max) return WeightTable({{k_min, value, 0}});
    return WeightTable({{k_min, value, 0}, {k_max, value, 0}});
  }

  const std::vector<WeightEntry>& entries() const { return entries_; }
  Index min_k() const { return entries_.front().k; }
  Index max_k() const { return entries_.back().k; }

  double at(double k) const {
    if (k < static_cast<double>(min_k()) || k > static_cast<double>(max_k())) {
      throw ConfigError("WeightTable: k = " + format_real(k) + " outside the sampled range");
    }
    auto hi = std::lower_bound(entries_.begin(), entries_.end(), k,
                               [](const WeightEntry& e, double v) { return static_cast<double>(e.k) < v; });
    if (static_cast<double>(hi->k) == k) return hi->w_hat;
    const auto lo = hi - 1;
    const double f = (k - static_cast<double>(lo->k)) / static_cast<double>(hi->k - lo->k);
    return lo->w_hat + f * (hi->w_hat - lo->w_hat);
  }

  void write_csv(std::ostream& out) const {
    out << "k,w_hat,samples\n";
    for (const auto& e : entries_) out << e.k << ',' << format_real(e.w_hat) << ',' << e.samples << '\n';
  }

  static WeightTable read_csv(std::istream& in) {
    std::string line;
    std::vector<WeightEntry> rows;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line_no == 1 && line.rfind("k,", 0) == 0) continue;
      std::istringstream fields(line);
      std::string a, b, c;
      if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') || !std::getline(fields, c)) {
        throw ParseError("weight table line " + std::to_string(line_no) + ": expected k,w_hat,samples");
      }
      try {
        std::size_t used_a = 0, used_b = 0, used_c = 0;
        const long long k = std::stoll(a, &used_a);
        const double w = std::stod(b, &used_b);
        const unsigned long long s = std::stoull(c, &used_c);
        if (used_a != a.size() || used_b != b.size() || used_c != c.size()) throw std::invalid_argument("trailing");
        rows.push_back({static_cast<Index>(k), w, static_cast<std::size_t>(s)});
      } catch (const std::exception&) {
        throw ParseError("weight table line " + std::to_string(line_no) + ": malformed number");
      }
    }
    try {
      return WeightTable(std::move(rows));
    } catch (const ConfigError& e) {
      throw ParseError(e.what());
    }
  }

 private:
  std::vector<WeightEntry> entries_;
};

/// λ_BHc from a weight table: λ_i = λ_BH(i)·√(1 + w(i−1)·Σ_{j<i} λ_BH(j)²).
inline CorrectedSequence lambda_bhc_weighted(const WeightTable& table, Index p, double q) {
  detail::require_positive_count(p, "lambda_bhc_weighted");
  detail::require_level(q, "lambda_bhc_weighted");
  if (p > 1 && table.min_k() > 1) throw ConfigError("lambda_bhc_weighted: table must start at k = 1");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(p));
  double sum_sq = 0.0;
  bool complete = true;
  for (Index i = 1; i <= p; ++i) {
    const double bh = lambda_bh_at(i, p, q);
    if (i == 1) {
      values.push_back(bh);
    } else {
      if (i - 1 > table.max_k()) {
        complete = false;
        break;
      }
      values.push_back(bh * std::sqrt(1.0 + table.at(static_cast<double>(i - 1)) * sum_sq));
    }
    sum_sq += bh * bh;
  }
  return detail::cap_at_minimum(Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size())),
                                p, complete, "lambda_bhc_weighted");
}

/// Support sizes at which weights are sampled: 21 equidistant points on
/// [1, min(n, p−1)] plus 19 equispaced points inside the first interval,
/// rounded to integers, deduplicated and sorted. Short ranges use every integer.
inline std::vector<Index> weight_sampling_grid(Index n, Index p) {
  const Index K = std::min(n, p - 1);
  if (K < 1) throw ConfigError("weight_sampling_grid: need min(n, p-1) >= 1");
  std::vector<Index> ks;
  if (K < 21) {
    for (Index k = 1; k <= K; ++k) ks.push_back(k);
    return ks;
  }
  const double h = static_cast<double>(K - 1) / 20.0;
  for (int j = 0; j <= 20; ++j) ks.push_back(static_cast<Index>(std::lround(1.0 + j * h)));
  for (int j = 1; j <= 19; ++j) ks.push_back(static_cast<Index>(std::lround(1.0 + j * h / 20.0)));
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

struct WeightSamplingConfig {
  std::size_t initial_samples = 64;
  std::size_t max_samples_small_k = 8192;
  std::size_t max_samples_large_k = 4096;
  Index large_k = 300;         ///< k at which the smaller cap applies
  double rel_tol = 0.02;
  double max_condition = 1e12;
  std::size_t max_resamples = 10000;  ///< per batch, before giving up
  std::uint64_t seed = 1;
  unsigned threads = 0;        ///< 0 = default worker count
};

namespace detail {

struct WeightBatch {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
  std::size_t resampled = 0;

  double mean() const { return sum / static_cast<double>(count); }
  void merge(const WeightBatch& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    count += o.count;
    resampled += o.resampled;
  }
};

inline WeightBatch sample_weight_batch(const MatrixXd& X, Index k, std::size_t size, std::uint64_t seed,
                                       const WeightSamplingConfig& cfg) {
  Rng rng(seed);
  WeightBatch batch;
  MatrixXd XS(X.rows(), k);
  std::size_t failures = 0;
  while (batch.count < size) {
    const std::vector<Index> draw = rng.sample_without_replacement(X.cols(), k + 1);
    for (Index c = 0; c < k; ++c) XS.col(c) = X.col(draw[static_cast<std::size_t>(c)]);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(XS);
    const auto diag = qr.matrixR().diagonal().cwiseAbs();
    const double smallest = diag.minCoeff();
    if (qr.rank() < k || !(smallest > 0.0) || diag.maxCoeff() / smallest > cfg.max_condition) {
      ++batch.resampled;
      if (++failures > cfg.max_resamples) {
        throw NonconvergenceError("estimate_weights: too many ill-conditioned supports at k = " +
                                  std::to_string(k));
      }
      continue;
    }
    const VectorXd coef = qr.solve(X.col(draw.back()));
    const double value = coef.squaredNorm() / static_cast<double>(k);
    batch.sum += value;
    batch.sum_sq += value * value;
    ++batch.count;
  }
  return batch;
}

// Dynamic doubling: estimate, draw a reference batch of equal size, compare,
// merge; stop when the relative difference is below rel_tol or the cap is hit.
inline WeightEntry estimate_weight(const MatrixXd& X, Index k, const WeightSamplingConfig& cfg) {
  const std::size_t cap = k < cfg.large_k ? cfg.max_samples_small_k : cfg.max_samples_large_k;
  std::uint64_t batch_index = 0;
  WeightBatch total = sample_weight_batch(X, k, cfg.initial_samples,
                                          derive_seed(cfg.seed, static_cast<std::uint64_t>(k), batch_index++), cfg);
  while (total.count < cap) {
    const std::size_t size = std::min(total.count, cap - total.count);
    const WeightBatch reference =
        sample_weight_batch(X, k, size, derive_seed(cfg.seed, static_cast<std::uint64_t>(k), batch_index++), cfg);
    const double current = total.mean();
    const double diff = std::abs(reference.mean() - current);
    total.merge(reference);
    if (diff <= cfg.rel_tol * std::abs(current)) break;
  }
  const double n = static_cast<double>(total.count);
  const double mean = total.mean();
  const double var = total.count > 1 ? std::max(0.0, (total.sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {k, mean, total.count, std::sqrt(var / n), total.resampled};
}

}  // namespace detail

/// Monte-Carlo estimates of w_k for a fixed design, one entry per k.
inline WeightTable estimate_weights(const MatrixXd& X, std::vector<Index> ks, const WeightSamplingConfig& cfg = {}) {
  if (ks.empty()) throw ConfigError("estimate_weights: empty k list");
  if (cfg.initial_samples < 1) throw ConfigError("estimate_weights: initial_samples must be positive");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const Index limit = std::min(X.rows(), X.cols() - 1);
  for (Index k : ks) {
    if (k < 1 || k > limit) {
      throw ConfigError("estimate_weights: k = " + std::to_string(k) + " outside [1, min(n, p-1)]");
    }
  }
  std::vector<WeightEntry> entries(ks.size());
  parallel_for(ks.size(), cfg.threads, [&](std::size_t i) { entries[i] = detail::estimate_weight(X, ks[i], cfg); });
  return WeightTable(std::move(entries));
}

/// Same, drawing the design once from `design_sampler(seed)`.
template <class Sampler>
  requires std::invocable<Sampler, std::uint64_t>
WeightTable estimate_weights(Sampler&& design_sampler, Index n, Index p, std::vector<Index> ks,
                             const WeightSamplingConfig& cfg = {}) {
  const MatrixXd X = design_sampler(derive_seed(cfg.seed, 0xD35167ULL));
  detail::require_same_size(X.rows(), n, "estimate_weights: design rows");
  detail::require_same_size(X.cols(), p, "estimate_weights: design cols");
  return estimate_weights(X, std::move(ks), cfg);
}

enum class SequenceKind { bh, bhc_gaussian, bhc_weighted };

struct SequenceSpec {
  SequenceKind kind = SequenceKind::bh;
  Index p = 0;
  double q = 0.1;
  Index n = 0;                                ///< corrected kinds
  std::shared_ptr<const WeightTable> table;   ///< bhc_weighted
};

inline CorrectedSequence make_sequence(const SequenceSpec& spec) {
  switch (spec.kind) {
    case SequenceKind::bh: {
      LambdaSequence l = lambda_bh(spec.p, spec.q);
      return {l, spec.p, l.values()};
    }
    case SequenceKind::bhc_gaussian:
      return lambda_bhc_gaussian(spec.n, spec.p, spec.q);
    case SequenceKind::bhc_weighted:
      if (!spec.table) throw ConfigError("bhc_weighted sequence needs a weight table");
      return lambda_bhc_weighted(*spec.table, spec.p, spec.q);
  }
  throw ConfigError("unknown sequence kind");
}

/// CSV with header `i,lambda`, 1-based i.
inline void write_sequence_csv(std::ostream& out, const LambdaSequence& lambda) {
  out << "i,lambda\n";
  for (Index i = 0; i < lambda.size(); ++i) out << (i + 1) << ',' << format_real(lambda[i]) << '\n';
}

}  // namespace slope
