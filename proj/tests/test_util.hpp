#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "slope/rng.hpp"
#include "slope/sorted_l1.hpp"

namespace tu {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Nonincreasing |N(0, scale²)| draws; λ_1 bumped away from zero.
inline slope::LambdaSequence random_lambda(slope::Rng& rng, Index n, double scale = 1.0) {
  VectorXd v = rng.normal_vector(n, scale).cwiseAbs();
  std::sort(v.data(), v.data() + n, std::greater<>());
  v[0] += 1e-3;
  return slope::LambdaSequence(v);
}

inline VectorXd sorted_desc(VectorXd v) {
  std::sort(v.data(), v.data() + v.size(), std::greater<>());
  return v;
}

inline std::string temp_path(const std::string& name) {
  const std::filesystem::path dir(SLOPE_TEST_TMPDIR);
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace tu
