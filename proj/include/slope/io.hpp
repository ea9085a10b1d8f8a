#pragma once

// Matrix and vector files.
//
// CSV: one row per line, comma separated, optional non-numeric header line.
// A vector is a single column (or a single row).
//
// SLP1 binary: the 4 bytes "SLP1", uint64 rows, uint64 cols (little endian),
// then rows·cols little-endian IEEE-754 doubles in row-major order. The file
// size must match the header exactly.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "slope/errors.hpp"
#include "slope/format.hpp"

namespace slope {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace detail {

inline bool parse_real(const std::string& field, double& out) {
  std::size_t start = field.find_first_not_of(" \t");
  if (start == std::string::npos) return false;
  std::size_t end = field.find_last_not_of(" \t");
  const std::string s = field.substr(start, end - start + 1);
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace detail

inline MatrixXd read_csv_matrix(std::istream& in, const std::string& name = "input") {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j) numeric = numeric && detail::parse_real(fields[j], row[j]);
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw ParseError(name + ": line " + std::to_string(line_no) + ": non-numeric field");
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw ParseError(name + ": line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                       " fields, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(name + ": no data rows");
  MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) M(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return M;
}

inline VectorXd read_csv_vector(std::istream& in, const std::string& name = "input") {
  const MatrixXd M = read_csv_matrix(in, name);
  if (M.cols() == 1) return M.col(0);
  if (M.rows() == 1) return M.row(0).transpose();
  throw ParseError(name + ": expected a single row or column, found " + std::to_string(M.rows()) + "x" +
                   std::to_string(M.cols()));
}

inline void write_csv_matrix(std::ostream& out, const MatrixXd& M) {
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << format_real(M(i, j));
    out << '\n';
  }
}

/// One value per line under `header` (omitted when empty).
inline void write_csv_vector(std::ostream& out, const VectorXd& v, const std::string& header = "") {
  if (!header.empty()) out << header << '\n';
  for (Index i = 0; i < v.size(); ++i) out << format_real(v[i]) << '\n';
}

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((x >> (8 * b)) & 0xFFu) << (8 * (7 - b));
    return r;
  }
  return x;
}

inline void write_u64(std::ostream& out, std::uint64_t x) {
  const std::uint64_t le = to_little_endian(x);
  out.write(reinterpret_cast<const char*>(&le), 8);
}

inline bool read_u64(std::istream& in, std::uint64_t& x) {
  std::uint64_t le = 0;
  if (!in.read(reinterpret_cast<char*>(&le), 8)) return false;
  x = to_little_endian(le);
  return true;
}

}  // namespace detail

inline void write_binary_matrix(std::ostream& out, const MatrixXd& M) {
  out.write("SLP1", 4);
  detail::write_u64(out, static_cast<std::uint64_t>(M.rows()));
  detail::write_u64(out, static_cast<std::uint64_t>(M.cols()));
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) detail::write_u64(out, std::bit_cast<std::uint64_t>(M(i, j)));
  }
}

inline MatrixXd read_binary_matrix(std::istream& in, const std::string& name = "input") {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SLP1", 4) != 0) throw ParseError(name + ": missing SLP1 magic");
  std::uint64_t rows = 0, cols = 0;
  if (!detail::read_u64(in, rows) || !detail::read_u64(in, cols)) throw ParseError(name + ": truncated header");
  if (rows == 0 || cols == 0 || rows > (1ULL << 32) || cols > (1ULL << 32) || rows * cols > (1ULL << 34)) {
    throw ParseError(name + ": implausible dimensions");
  }
  MatrixXd M(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::uint64_t i = 0; i < rows; ++i) {
    for (std::uint64_t j = 0; j < cols; ++j) {
      std::uint64_t bits = 0;
      if (!detail::read_u64(in, bits)) {
        throw ParseError(name + ": truncated data (header declares " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ")");
      }
      M(static_cast<Index>(i), static_cast<Index>(j)) = std::bit_cast<double>(bits);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(name + ": trailing bytes after data");
  return M;
}

inline bool has_binary_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  return in.read(magic, 4) && std::memcmp(magic, "SLP1", 4) == 0;
}

/// Reads a CSV or SLP1 file, chosen by content.
inline MatrixXd load_matrix(const std::string& path) {
  const bool binary = has_binary_magic(path);
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw ParseError("cannot open " + path);
  return binary ? read_binary_matrix(in, path) : read_csv_matrix(in, path);
}

inline VectorXd load_vector(const std::string& path) {
  const MatrixXd M = load_matrix(path);
  if (M.cols() == 1) return M.col(0);
  if (M.rows() == 1) return M.row(0).transpose();
  throw ParseError(path + ": expected a vector");
}

}  // namespace slope
