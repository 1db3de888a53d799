#pragma once

#include <cmath>
#include <string>

#include "hbe/types.hpp"

namespace hbe {

/// Index of the first pivot at which an unblocked Cholesky of `a` breaks
/// down, or -1 if the factorization succeeds.
inline long failing_cholesky_pivot(const Matrix& a) {
  const long n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (long j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) return j;
    l(j, j) = std::sqrt(d);
    for (long i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return -1;
}

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Construction throws NumericalError (with the failing pivot) when the
/// matrix is not numerically SPD.
class SpdFactor {
 public:
  SpdFactor() = default;

  explicit SpdFactor(const Matrix& a, const char* what = "matrix") {
    if (a.rows() != a.cols())
      throw ArgumentError(std::string(what) + ": not square");
    if (!a.allFinite()) {
      long bad = 0;
      for (long j = 0; j < a.cols(); ++j)
        if (!a.col(j).allFinite()) { bad = j; break; }
      throw NumericalError(std::string(what) + ": non-finite entries", bad);
    }
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) {
      long pivot = failing_cholesky_pivot(a);
      throw NumericalError(std::string(what) + ": Cholesky failed at pivot " +
                               std::to_string(pivot),
                           pivot);
    }
  }

  long size() const { return llt_.rows(); }

  template <typename Rhs>
  auto solve(const Eigen::MatrixBase<Rhs>& b) const {
    return llt_.solve(b);
  }

  Matrix inverse() const {
    return llt_.solve(Matrix::Identity(size(), size()));
  }

  double log_det() const {
    const auto& l = llt_.matrixLLT();
    double s = 0.0;
    for (long j = 0; j < l.rows(); ++j) s += std::log(l(j, j));
    return 2.0 * s;
  }

  /// xᵀ A⁻¹ x
  double inv_quad(const Vector& x) const {
    Vector y = llt_.matrixL().solve(x);
    return y.squaredNorm();
  }

 private:
  Eigen::LLT<Matrix> llt_;
};

inline Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace hbe
