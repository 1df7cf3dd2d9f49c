#pragma once

// Quadratic outer losses and the three ways of fitting the outer variable
// theta against the N-th inner iterate z_N(theta):
//   * closed form: minimum-norm least squares on theta -> l(z_N(theta)),
//   * unrolled gradient descent on the same objective,
//   * the practical implicit-differentiation descent with pseudo-inverse
//     Jacobians evaluated at z_N.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "i2o/fixture.hpp"
#include "i2o/inner.hpp"
#include "i2o/linops.hpp"

namespace i2o::outer {

/// l(z) = 1/2 ||K_out z - omega||^2 with K_out of shape d_omega x d_z.
struct QuadraticOuterLoss {
  Matrix k_out;
  Vector omega;

  std::size_t d_omega() const { return static_cast<std::size_t>(k_out.rows()); }
  std::size_t d_z() const { return static_cast<std::size_t>(k_out.cols()); }
  bool strongly_convex() const;
};

double loss(const QuadraticOuterLoss& l, const Vector& z);
Vector loss_gradient(const QuadraticOuterLoss& l, const Vector& z);

/// Everything that defines a bilevel instance besides theta and N.
struct BilevelSetup {
  inner::AffineInnerProblem inner;
  QuadraticOuterLoss outer;
  double eta = 0.0;
  Vector z0;
};

/// Throws std::invalid_argument when inner and outer shapes disagree, and
/// inner::InvalidProblem when the inner problem is invalid.
void require_consistent(const BilevelSetup& s);

enum class TrainerKind { closed_form, unrolled_gd, ift_gd };

std::string_view to_string(TrainerKind kind);
TrainerKind trainer_from_string(std::string_view name);

struct TrainedOuter {
  Vector theta;
  TrainerKind method = TrainerKind::closed_form;
  std::size_t n_train = 0;
  /// Characterization residual (closed form) or final gradient norm.
  double residual = 0.0;
  std::size_t steps_taken = 0;
  bool converged = false;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// l(z_{n_eval}(theta)); n_eval may be inner::kConverged.
double loss_at(const BilevelSetup& s, const Vector& theta, std::size_t n_eval);

/// theta -> l(z_N(theta)) written as 1/2 ||M theta + v||^2 with
/// M = K_out K_in^T E_N U and v = K_out r_N - omega.
struct ReducedObjective {
  Matrix m;
  Vector v;
};
ReducedObjective reduced_objective(const BilevelSetup& s, std::size_t n);

/// ||M theta + P(M) v|| / (1 + ||v||): zero exactly on the minimizers of
/// theta -> l(z_N(theta)).
double characterization_residual(const BilevelSetup& s, std::size_t n, const Vector& theta);

TrainedOuter train_closed_form(const BilevelSetup& s, std::size_t n);

/// M^T (M theta + v).
Vector unrolled_gradient(const BilevelSetup& s, std::size_t n, const Vector& theta);

struct GradientDescentOptions {
  std::size_t outer_steps = 100'000;
  /// Defaults to 1 / sigma_max(M)^2.
  std::optional<double> outer_lr;
  /// Defaults to zero.
  std::optional<Vector> theta0;
  double tolerance = 1e-10;
};

/// Gradient descent on theta -> l(z_N(theta)) with the exact unrolled
/// gradient. Throws TrainingError after 100 consecutive loss increases.
TrainedOuter train_unrolled_gd(const BilevelSetup& s, std::size_t n,
                               const GradientDescentOptions& options = {});

/// p_N(theta) = -((d_z f)^+ d_theta f)^T grad l(z_N(theta)) with
/// d_z f = K_in^T B and d_theta f = K_in^T U.
Vector ift_gradient(const BilevelSetup& s, const Vector& theta, std::size_t n);

/// X_N, the linear part of theta -> p_N(theta).
Matrix ift_linear_part(const BilevelSetup& s, std::size_t n);

/// The same matrix written as -(Hb^{-1} U)^T K_in G K_in^T E_N U with
/// Hb = B K_in^T and G = K_out^T K_out. Agrees with ift_linear_part when
/// range(B^T) = range(K_in^T), e.g. B = K_in or d_x = d_z.
Matrix ift_linear_part_factored(const BilevelSetup& s, std::size_t n);

/// 1 / (rho(X_N) + eps) with eps = 0.1 rho(X_N); 1 when rho(X_N) = 0.
double ift_step_size(const BilevelSetup& s, std::size_t n);

struct IftOptions {
  std::size_t outer_steps = 100'000;
  std::optional<Vector> theta0;
  /// Defaults to ift_step_size.
  std::optional<double> step_size;
  double tolerance = 1e-10;
};

/// theta <- theta - alpha_N p_N(theta) until ||p_N|| <= tolerance. Throws
/// TrainingError when ||p_N|| keeps growing (100 consecutive increases or a
/// non-finite value).
TrainedOuter train_ift(const BilevelSetup& s, std::size_t n, const IftOptions& options = {});

Fixture to_fixture(const QuadraticOuterLoss& l);
QuadraticOuterLoss loss_from_fixture(const Fixture& f);

/// Appends theta, method, n_train, residual, steps_taken and converged.
void append_to_fixture(Fixture& f, const TrainedOuter& t);
TrainedOuter trained_from_fixture(const Fixture& f);

}  // namespace i2o::outer
