#pragma once

// Shared helpers for the test suites: hand-rolled generators and error
// measures. Generators take a SeededSource so every case is reproducible.

#include <algorithm>
#include <cstddef>
#include <cstdint>

#include "i2o/linops.hpp"

namespace i2o::testing {

inline double rel_err(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / (1.0 + want.norm());
}

inline double rel_err(double got, double want) { return std::abs(got - want) / (1.0 + std::abs(want)); }

inline std::size_t draw_count(linops::SeededSource& src, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(src.next_u64() % (hi - lo + 1));
}

/// Gaussian matrix of the requested rank (rank <= min(rows, cols)).
inline Matrix matrix_of_rank(linops::SeededSource& src, std::size_t rows, std::size_t cols, std::size_t rank) {
  if (rank == 0) return Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  return linops::gaussian_matrix(src, rows, rank) * linops::gaussian_matrix(src, rank, cols);
}

/// Random shape up to max_dim with a random rank, sometimes deficient.
inline Matrix random_matrix(linops::SeededSource& src, std::size_t max_dim) {
  const std::size_t rows = draw_count(src, 1, max_dim);
  const std::size_t cols = draw_count(src, 1, max_dim);
  const std::size_t rank = draw_count(src, 0, std::min(rows, cols));
  return matrix_of_rank(src, rows, cols, rank);
}

/// Symmetric positive definite with eigenvalues in [lo, hi].
inline Matrix spd_matrix(linops::SeededSource& src, std::size_t d, double lo, double hi) {
  const Eigen::HouseholderQR<Matrix> qr(linops::gaussian_matrix(src, d, d));
  const Matrix q = qr.householderQ();
  Vector eig(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < eig.size(); ++i) eig(i) = lo + (hi - lo) * src.uniform();
  return q * eig.asDiagonal() * q.transpose();
}

}  // namespace i2o::testing
