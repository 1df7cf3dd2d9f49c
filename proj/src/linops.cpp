#include "i2o/linops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace i2o::linops {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Eigen::JacobiSVD<Matrix> thin_svd(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

std::size_t rank_of(const Vector& s, Eigen::Index rows, Eigen::Index cols) {
  const double cutoff = rank_cutoff(s, rows, cols);
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++r;
  }
  return r;
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw std::domain_error(std::string(what) + ": non-finite entry");
  }
}

double rank_cutoff(const Vector& s, Eigen::Index rows, Eigen::Index cols) {
  if (s.size() == 0) return 0.0;
  return kRankRelTol * s(0) * static_cast<double>(std::max(rows, cols));
}

std::size_t numerical_rank(const Matrix& m) {
  require_finite(m, "numerical_rank");
  if (m.size() == 0) return 0;
  const auto svd = thin_svd(m);
  return rank_of(svd.singularValues(), m.rows(), m.cols());
}

Matrix pinv(const Matrix& m) {
  require_finite(m, "pinv");
  Matrix out = Matrix::Zero(m.cols(), m.rows());
  if (m.size() == 0) return out;
  const auto svd = thin_svd(m);
  const Vector& s = svd.singularValues();
  const std::size_t r = rank_of(s, m.rows(), m.cols());
  for (std::size_t i = 0; i < r; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out.noalias() += (svd.matrixV().col(k) / s(k)) * svd.matrixU().col(k).transpose();
  }
  return out;
}

Matrix proj_range(const Matrix& x) {
  require_finite(x, "proj_range");
  if (x.cols() == 0) return Matrix::Zero(x.rows(), x.rows());
  const auto svd = thin_svd(x);
  const auto r = static_cast<Eigen::Index>(rank_of(svd.singularValues(), x.rows(), x.cols()));
  const auto q = svd.matrixU().leftCols(r);
  return q * q.transpose();
}

Matrix proj_orthogonal_complement(const Matrix& x) {
  return Matrix::Identity(x.rows(), x.rows()) - proj_range(x);
}

SpectrumReport spectrum(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("spectrum: matrix is " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ", not square");
  }
  require_finite(m, "spectrum");
  SpectrumReport report;
  if (m.size() == 0) return report;
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("spectrum: eigenvalue iteration did not converge");
  }
  const auto& ev = solver.eigenvalues();
  report.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  report.min_real_part = report.eigenvalues.front().real();
  for (const auto& lambda : report.eigenvalues) {
    report.spectral_radius = std::max(report.spectral_radius, std::abs(lambda));
    report.min_real_part = std::min(report.min_real_part, lambda.real());
  }
  return report;
}

Matrix matrix_power(const Matrix& m, std::size_t n) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix_power: non-square matrix");
  Matrix result = Matrix::Identity(m.rows(), m.cols());
  Matrix base = m;
  while (n > 0) {
    if (n & 1U) result = result * base;
    n >>= 1U;
    if (n > 0) base = base * base;
  }
  return result;
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double min_singular_value(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  return s(s.size() - 1);
}

std::uint64_t SeededSource::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double SeededSource::uniform() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double SeededSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

SeededSource SeededSource::child(std::uint64_t k) const {
  return SeededSource(mix64(seed_ + (k + 1) * kGolden));
}

Matrix gaussian_matrix(SeededSource& src, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("gaussian_matrix: empty shape");
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = src.normal();
  }
  return out;
}

Vector gaussian_vector(SeededSource& src, std::size_t n) {
  if (n == 0) throw std::invalid_argument("gaussian_vector: empty shape");
  Vector out(n);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = src.normal();
  return out;
}

}  // namespace i2o::linops
