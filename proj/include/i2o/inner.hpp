#pragma once

// Affine inner problems f(z, theta) = K_in^T (B z + U theta + c) and the
// fixed-point iteration z_{N+1} = z_N - eta f(z_N, theta), both as a literal
// recursion and as the closed-form affine map
//   z_N(theta) = K_in^T E_N U theta + r_N.

#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "i2o/fixture.hpp"
#include "i2o/linops.hpp"

namespace i2o::inner {

/// Eigenvalues of B K_in^T must have real part above this.
inline constexpr double kSpectralTol = 1e-10;

/// Iteration count standing for N -> infinity (the exact fixed point).
inline constexpr std::size_t kConverged = std::numeric_limits<std::size_t>::max();

class InvalidProblem : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AffineInnerProblem {
  Matrix k_in;  // d_x x d_z
  Matrix b;     // d_x x d_z
  Matrix u;     // d_x x d_theta
  Vector c;     // d_x

  std::size_t d_x() const { return static_cast<std::size_t>(k_in.rows()); }
  std::size_t d_z() const { return static_cast<std::size_t>(k_in.cols()); }
  std::size_t d_theta() const { return static_cast<std::size_t>(u.cols()); }

  /// B K_in^T, the d_x x d_x matrix whose spectrum governs convergence.
  Matrix reduced_operator() const { return b * k_in.transpose(); }
};

struct InnerDiagnostics {
  bool shapes_consistent = false;
  bool finite = false;
  std::size_t rank_k_in = 0;
  bool surjective = false;
  linops::SpectrumReport spectrum;
  bool positive_spectrum = false;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Checks the structural assumptions; violations are reported, not thrown.
InnerDiagnostics validate(const AffineInnerProblem& p);

/// Throws InvalidProblem listing every violation.
void require_valid(const AffineInnerProblem& p);

/// f(z, theta).
Vector residual(const AffineInnerProblem& p, const Vector& z, const Vector& theta);

/// 0.9 * min over eigenvalues lambda of B K_in^T of 2 Re(lambda) / |lambda|^2.
double default_step_size(const AffineInnerProblem& p);

struct FixedPointConfig {
  double eta = 0.0;
  Vector z0;
  std::size_t n = 0;
};

/// Runs the recursion literally for cfg.n steps.
Vector iterate(const AffineInnerProblem& p, const Vector& theta, const FixedPointConfig& cfg);

struct LinearProcedure {
  Matrix e_n;  // d_x x d_x
  Vector r_n;  // d_z
  std::size_t n = 0;
  /// Invertibility threshold, when it has been computed.
  std::optional<std::size_t> n0;
  AffineInnerProblem problem;
  double eta = 0.0;
};

/// E_N = ((I - eta B K_in^T)^N - I)(B K_in^T)^{-1},
/// r_N = K_in^T E_N (c + B z0) + z0.
/// n == kConverged gives the fixed-point limit E = -(B K_in^T)^{-1}.
LinearProcedure closed_form_state(const AffineInnerProblem& p, double eta, const Vector& z0,
                                  std::size_t n);

/// K_in^T E_N U theta + r_N.
Vector apply(const LinearProcedure& proc, const Vector& theta);

/// A_N = K_in^T E_N U, the linear part of theta -> z_N(theta).
Matrix linear_part(const LinearProcedure& proc);

/// Smallest N <= n_max with ||(I - eta B K_in^T)^N||_2 < 0.5.
/// Throws std::runtime_error when no such N exists.
std::size_t invertibility_threshold(const AffineInnerProblem& p, double eta,
                                    std::size_t n_max = 1'000'000);

/// Reduced surjective form of f = grad_z 1/2 ||K z + U theta + c||^2 for a
/// possibly rank-deficient K (m x d_z): with K = Q S W^T (rank r), returns
/// K_in = B = Q_r^T K, U' = Q_r^T U, c' = Q_r^T c, which yields the same f.
AffineInnerProblem reduce_quadratic(const Matrix& k, const Matrix& u, const Vector& c);

Fixture to_fixture(const AffineInnerProblem& p);
AffineInnerProblem problem_from_fixture(const Fixture& f);

}  // namespace i2o::inner
