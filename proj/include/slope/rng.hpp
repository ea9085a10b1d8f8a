#pragma once

// Reproducible random streams.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard.
// Uniforms use the top 53 bits of one draw; normals use the Marsaglia polar
// method; bounded integers use rejection sampling. None of these go through
// <random> distributions, whose outputs differ between standard libraries.
//
// Seeds for sub-streams are derived with the SplitMix64 finalizer:
//   derive_seed(m, a, b) = mix(mix(m ^ mix(a + φ)) ^ mix(b + 2φ)),  φ = 0x9E3779B97F4A7C15.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace slope {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  constexpr std::uint64_t phi = 0x9E3779B97F4A7C15ULL;
  return splitmix64(splitmix64(master ^ splitmix64(a + phi)) ^ splitmix64(b + 2 * phi));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  Eigen::VectorXd normal_vector(Eigen::Index n, double sd = 1.0) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = sd * normal();
    return v;
  }

  /// k distinct indices from [0, p), in draw order (partial Fisher–Yates).
  std::vector<Eigen::Index> sample_without_replacement(Eigen::Index p, Eigen::Index k) {
    std::vector<Eigen::Index> pool(static_cast<std::size_t>(p));
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto j = i + static_cast<Eigen::Index>(index(static_cast<std::uint64_t>(p - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace slope
