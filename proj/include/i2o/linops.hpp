#pragma once

// Dense linear-algebra helpers shared by every other module: rank rules,
// Moore-Penrose pseudo-inverse, orthogonal range projectors, spectra,
// matrix powers and a seeded Gaussian source.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace i2o {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace i2o

namespace i2o::linops {

/// Singular values below kRankRelTol * sigma_max * max(rows, cols) count as zero.
inline constexpr double kRankRelTol = 1e-12;

struct SpectrumReport {
  std::vector<std::complex<double>> eigenvalues;
  double spectral_radius = 0.0;
  double min_real_part = 0.0;
};

bool all_finite(const Matrix& m);

/// Throws std::domain_error naming `what` when `m` has a NaN or infinite entry.
void require_finite(const Matrix& m, std::string_view what);

/// Absolute cutoff for the singular values `s` (sorted decreasingly) of a
/// rows x cols matrix.
double rank_cutoff(const Vector& s, Eigen::Index rows, Eigen::Index cols);

std::size_t numerical_rank(const Matrix& m);

Matrix pinv(const Matrix& m);

/// Orthogonal projector onto range(x), as U_r U_r^T from a thin SVD.
Matrix proj_range(const Matrix& x);

/// Orthogonal projector onto range(x)^perp.
Matrix proj_orthogonal_complement(const Matrix& x);

SpectrumReport spectrum(const Matrix& m);

/// m^n by repeated squaring; m^0 is the identity.
Matrix matrix_power(const Matrix& m, std::size_t n);

/// Largest singular value (spectral norm).
double operator_norm(const Matrix& m);

double min_singular_value(const Matrix& m);

/// Deterministic random stream.
///
/// The generator is SplitMix64 (Steele, Lea & Flood 2014) with its published
/// increment 0x9E3779B97F4A7C15 and finalizer constants 0xBF58476D1CE4E5B9 /
/// 0x94D049BB133111EB. Uniforms take the top 53 bits; normals use the
/// Box-Muller transform and consume two uniforms per pair of normals.
///
/// Children for concurrent use: child(k) is seeded with mix(seed + (k + 1) *
/// 0x9E3779B97F4A7C15), where mix is the SplitMix64 finalizer. A child's
/// stream depends only on (seed, k), never on how much the parent consumed.
class SeededSource {
 public:
  static constexpr std::string_view kAlgorithmId = "splitmix64+box-muller/v1";

  explicit SeededSource(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on (0, 1].
  double uniform();
  double normal();

  SeededSource child(std::uint64_t k) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. standard normal entries, drawn in row-major order.
Matrix gaussian_matrix(SeededSource& src, std::size_t rows, std::size_t cols);

Vector gaussian_vector(SeededSource& src, std::size_t n);

}  // namespace i2o::linops
