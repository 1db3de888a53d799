#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hbe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A vectorized square patch (row-major, length side*side).
using Patch = Vector;

/// Bad shapes, out-of-range parameters, malformed configuration.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside the domain of a function (e.g. an indefinite precision).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Factorization or solve failure. `pivot()` is the failing pivot index
/// when a Cholesky factorization broke down, -1 otherwise.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, long pivot = -1)
      : std::runtime_error(what), pivot_(pivot) {}
  long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

/// A pipeline invariant was violated (uncovered pixel, unusable capture).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents. `offset()` is the byte offset of the problem.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace hbe
