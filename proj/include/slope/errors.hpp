#pragma once

#include <stdexcept>
#include <string>

namespace slope {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands have incompatible lengths or shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on an input was violated (e.g. unsorted prox input).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A configuration cannot be honored (n too small for a correction, table too short, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative method or root finder failed to converge or bracket a root.
class NonconvergenceError : public Error {
 public:
  using Error::Error;
};

/// A least-squares system is rank deficient.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_same_size(long a, long b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail
}  // namespace slope
