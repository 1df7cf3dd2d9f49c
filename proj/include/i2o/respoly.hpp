#pragma once

// Residual polynomials of gradient-based methods on quadratics.
//
// A method is described by per-step coefficients c_i^{(N)}, i = 0..N:
//   z_{N+1} = z_N + sum_{i<N} c_i^{(N)} (z_{i+1} - z_i) + c_N^{(N)} grad F(z_N)
// and its residual polynomials obey
//   P_0 = 1,
//   P_{N+1}(l) = (1 + c_N^{(N)} l) P_N(l) + sum_{i<N} c_i^{(N)} (P_{i+1}(l) - P_i(l)).
// Plain gradient descent has c_N^{(N)} = -eta and nothing else; heavy-ball
// momentum additionally has c_{N-1}^{(N)} = m and a first step of
// c_0^{(0)} = -eta / (1 + m).

#include <cstddef>
#include <variant>
#include <vector>

#include "i2o/inner.hpp"
#include "i2o/linops.hpp"

namespace i2o::respoly {

struct PlainGd {
  double eta = 0.0;
};

/// z_{N+1} = z_N - eta grad F(z_N) + m (z_N - z_{N-1}) for N >= 1, started
/// with z_1 = z_0 - eta / (1 + m) grad F(z_0) (Polyak heavy ball).
struct Momentum {
  double eta = 0.0;
  double m = 0.0;
};

/// coefficients[N] holds c_0^{(N)}, ..., c_N^{(N)} (N + 1 values).
struct CustomSchedule {
  std::vector<std::vector<double>> coefficients;
};

using GradientMethod = std::variant<PlainGd, Momentum, CustomSchedule>;

/// Throws std::invalid_argument on eta <= 0, m outside [0, 1) or a malformed
/// schedule.
void validate_method(const GradientMethod& method);

/// c_0^{(step)}, ..., c_step^{(step)}.
std::vector<double> step_coefficients(const GradientMethod& method, std::size_t step);

class ResidualPolynomial {
 public:
  ResidualPolynomial(GradientMethod method, std::size_t degree);

  std::size_t degree() const { return degree_; }
  const GradientMethod& method() const { return method_; }

  double operator()(double lambda) const;
  /// Same recursion with matrix argument; no eigendecomposition.
  Matrix operator()(const Matrix& h) const;

  /// P_0(lambda), ..., P_degree(lambda).
  std::vector<double> trajectory(double lambda) const;

 private:
  GradientMethod method_;
  std::size_t degree_;
};

ResidualPolynomial residual_poly(const GradientMethod& method, std::size_t n);

/// z_N = P_N(H) z0 + (P_N(H) - I) H^+ K^T c with H = K^T K: the iterate of the
/// method on F(z) = 1/2 ||K z + c||^2.
Vector quadratic_iterate(const Matrix& k, const Vector& c, const Vector& z0,
                         const ResidualPolynomial& poly);

/// m^{N/2} (1 + (1 - m) / (1 + m N)) < 1.
bool momentum_condition(double m, std::size_t n);

/// Smallest N satisfying momentum_condition, by linear scan. 0 < m < 1.
std::size_t momentum_n0(double m);

/// Gradient method on F(z, theta) = 1/2 ||K_in z + U theta + c||^2 as a linear
/// procedure: E_N = (P_N(Hb) - I) Hb^{-1}, Hb = K_in K_in^T, and
/// r_N = P_N(H) z0 + (P_N(H) - I) H^+ K_in^T c, H = K_in^T K_in.
inner::LinearProcedure procedure_from_quadratic(const Matrix& k_in, const Matrix& u,
                                                const Vector& c, const GradientMethod& method,
                                                const Vector& z0, std::size_t n);

}  // namespace i2o::respoly
