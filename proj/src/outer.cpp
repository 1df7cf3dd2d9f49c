#include "i2o/outer.hpp"

#include <cmath>
#include <limits>

namespace i2o::outer {
namespace {

constexpr std::size_t kMaxConsecutiveIncreases = 100;

void require_dim(Eigen::Index got, std::size_t want, const char* what) {
  if (static_cast<std::size_t>(got) != want) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(want) +
                                ", got " + std::to_string(got));
  }
}

Vector initial_theta(const BilevelSetup& s, const std::optional<Vector>& theta0) {
  const auto d = static_cast<Eigen::Index>(s.inner.d_theta());
  if (!theta0) return Vector::Zero(d);
  require_dim(theta0->size(), s.inner.d_theta(), "theta0");
  return *theta0;
}

// (d_z f)^+ d_theta f, the d_z x d_theta matrix of the practical IFT step.
Matrix ift_jacobian(const inner::AffineInnerProblem& p) {
  const Matrix kt = p.k_in.transpose();
  return linops::pinv(kt * p.b) * (kt * p.u);
}

}  // namespace

bool QuadraticOuterLoss::strongly_convex() const {
  return linops::numerical_rank(k_out) == d_z();
}

double loss(const QuadraticOuterLoss& l, const Vector& z) {
  require_dim(z.size(), l.d_z(), "loss z");
  require_dim(l.omega.size(), l.d_omega(), "loss omega");
  return 0.5 * (l.k_out * z - l.omega).squaredNorm();
}

Vector loss_gradient(const QuadraticOuterLoss& l, const Vector& z) {
  require_dim(z.size(), l.d_z(), "loss_gradient z");
  return l.k_out.transpose() * (l.k_out * z - l.omega);
}

void require_consistent(const BilevelSetup& s) {
  inner::require_valid(s.inner);
  require_dim(s.outer.k_out.cols(), s.inner.d_z(), "outer k_out columns");
  require_dim(s.outer.omega.size(), s.outer.d_omega(), "outer omega");
  require_dim(s.z0.size(), s.inner.d_z(), "z0");
  linops::require_finite(s.outer.k_out, "k_out");
  linops::require_finite(s.outer.omega, "omega");
}

std::string_view to_string(TrainerKind kind) {
  switch (kind) {
    case TrainerKind::closed_form: return "closed_form";
    case TrainerKind::unrolled_gd: return "unrolled_gd";
    case TrainerKind::ift_gd: return "ift_gd";
  }
  return "unknown";
}

TrainerKind trainer_from_string(std::string_view name) {
  if (name == "closed_form") return TrainerKind::closed_form;
  if (name == "unrolled_gd") return TrainerKind::unrolled_gd;
  if (name == "ift_gd") return TrainerKind::ift_gd;
  throw std::invalid_argument("unknown trainer '" + std::string(name) + "'");
}

double loss_at(const BilevelSetup& s, const Vector& theta, std::size_t n_eval) {
  const auto proc = inner::closed_form_state(s.inner, s.eta, s.z0, n_eval);
  return loss(s.outer, inner::apply(proc, theta));
}

ReducedObjective reduced_objective(const BilevelSetup& s, std::size_t n) {
  require_consistent(s);
  const auto proc = inner::closed_form_state(s.inner, s.eta, s.z0, n);
  return {s.outer.k_out * inner::linear_part(proc), s.outer.k_out * proc.r_n - s.outer.omega};
}

double characterization_residual(const BilevelSetup& s, std::size_t n, const Vector& theta) {
  const auto obj = reduced_objective(s, n);
  require_dim(theta.size(), s.inner.d_theta(), "characterization theta");
  const Vector gap = obj.m * theta + linops::proj_range(obj.m) * obj.v;
  return gap.norm() / (1.0 + obj.v.norm());
}

TrainedOuter train_closed_form(const BilevelSetup& s, std::size_t n) {
  const auto obj = reduced_objective(s, n);
  TrainedOuter t;
  t.theta = -(linops::pinv(obj.m) * obj.v);
  t.method = TrainerKind::closed_form;
  t.n_train = n;
  t.residual = (obj.m * t.theta + linops::proj_range(obj.m) * obj.v).norm() / (1.0 + obj.v.norm());
  t.converged = t.residual <= 1e-8;
  return t;
}

Vector unrolled_gradient(const BilevelSetup& s, std::size_t n, const Vector& theta) {
  const auto obj = reduced_objective(s, n);
  require_dim(theta.size(), s.inner.d_theta(), "unrolled_gradient theta");
  return obj.m.transpose() * (obj.m * theta + obj.v);
}

TrainedOuter train_unrolled_gd(const BilevelSetup& s, std::size_t n,
                               const GradientDescentOptions& options) {
  const auto obj = reduced_objective(s, n);
  TrainedOuter t;
  t.method = TrainerKind::unrolled_gd;
  t.n_train = n;
  t.theta = initial_theta(s, options.theta0);

  double lr = 1.0;
  if (options.outer_lr) {
    lr = *options.outer_lr;
  } else if (const double sigma = linops::operator_norm(obj.m); sigma > 0.0) {
    lr = 1.0 / (sigma * sigma);
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train_unrolled_gd: outer_lr must be positive");

  Vector residual = obj.m * t.theta + obj.v;
  Vector grad = obj.m.transpose() * residual;
  double previous_loss = 0.5 * residual.squaredNorm();
  std::size_t increases = 0;
  while (grad.norm() > options.tolerance && t.steps_taken < options.outer_steps) {
    t.theta -= lr * grad;
    ++t.steps_taken;
    residual = obj.m * t.theta + obj.v;
    grad = obj.m.transpose() * residual;
    const double current_loss = 0.5 * residual.squaredNorm();
    if (!std::isfinite(current_loss)) {
      throw TrainingError("train_unrolled_gd: loss became non-finite after " +
                          std::to_string(t.steps_taken) + " steps (lr " + format_double(lr) + ")");
    }
    increases = current_loss > previous_loss ? increases + 1 : 0;
    if (increases >= kMaxConsecutiveIncreases) {
      throw TrainingError("train_unrolled_gd: loss increased for " + std::to_string(increases) +
                          " consecutive steps (lr " + format_double(lr) + ", loss " +
                          format_double(current_loss) + ")");
    }
    previous_loss = current_loss;
  }
  t.residual = grad.norm();
  t.converged = t.residual <= options.tolerance;
  return t;
}

Vector ift_gradient(const BilevelSetup& s, const Vector& theta, std::size_t n) {
  require_consistent(s);
  const auto proc = inner::closed_form_state(s.inner, s.eta, s.z0, n);
  const Vector z = inner::apply(proc, theta);
  return -(ift_jacobian(s.inner).transpose() * loss_gradient(s.outer, z));
}

Matrix ift_linear_part(const BilevelSetup& s, std::size_t n) {
  require_consistent(s);
  const auto proc = inner::closed_form_state(s.inner, s.eta, s.z0, n);
  const Matrix g = s.outer.k_out.transpose() * s.outer.k_out;
  return -(ift_jacobian(s.inner).transpose() * g * inner::linear_part(proc));
}

Matrix ift_linear_part_factored(const BilevelSetup& s, std::size_t n) {
  require_consistent(s);
  const auto& p = s.inner;
  const auto proc = inner::closed_form_state(p, s.eta, s.z0, n);
  const Matrix g = s.outer.k_out.transpose() * s.outer.k_out;
  const Matrix y = p.reduced_operator().partialPivLu().solve(p.u);
  return -(y.transpose() * p.k_in * g * p.k_in.transpose() * proc.e_n * p.u);
}

double ift_step_size(const BilevelSetup& s, std::size_t n) {
  const double rho = linops::spectrum(ift_linear_part(s, n)).spectral_radius;
  if (rho == 0.0) return 1.0;
  return 1.0 / (rho + 0.1 * rho);
}

TrainedOuter train_ift(const BilevelSetup& s, std::size_t n, const IftOptions& options) {
  require_consistent(s);
  const auto proc = inner::closed_form_state(s.inner, s.eta, s.z0, n);
  const Matrix jac_t = ift_jacobian(s.inner).transpose();
  const double alpha = options.step_size ? *options.step_size : ift_step_size(s, n);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("train_ift: step size must be positive");

  TrainedOuter t;
  t.method = TrainerKind::ift_gd;
  t.n_train = n;
  t.theta = initial_theta(s, options.theta0);
  auto direction = [&](const Vector& theta) -> Vector {
    return -(jac_t * loss_gradient(s.outer, inner::apply(proc, theta)));
  };

  Vector p = direction(t.theta);
  double previous = p.norm();
  std::size_t increases = 0;
  while (p.norm() > options.tolerance && t.steps_taken < options.outer_steps) {
    t.theta -= alpha * p;
    ++t.steps_taken;
    p = direction(t.theta);
    const double current = p.norm();
    if (!std::isfinite(current)) {
      throw TrainingError("train_ift: direction became non-finite after " +
                          std::to_string(t.steps_taken) + " steps (alpha " + format_double(alpha) + ")");
    }
    increases = current > previous ? increases + 1 : 0;
    if (increases >= kMaxConsecutiveIncreases) {
      throw TrainingError("train_ift: ||p_N|| grew for " + std::to_string(increases) +
                          " consecutive steps (alpha " + format_double(alpha) + ", ||p_N|| " +
                          format_double(current) + "); the descent does not contract at N = " +
                          std::to_string(n));
    }
    previous = current;
  }
  t.residual = p.norm();
  t.converged = t.residual <= options.tolerance;
  return t;
}

Fixture to_fixture(const QuadraticOuterLoss& l) {
  Fixture f;
  f.set("k_out", l.k_out);
  f.set("omega", l.omega);
  return f;
}

QuadraticOuterLoss loss_from_fixture(const Fixture& f) {
  return {f.matrix("k_out"), f.vector("omega")};
}

void append_to_fixture(Fixture& f, const TrainedOuter& t) {
  f.set("theta", t.theta);
  f.set("method", std::string(to_string(t.method)));
  f.set("n_train", static_cast<double>(t.n_train));
  f.set("residual", t.residual);
  f.set("steps_taken", static_cast<double>(t.steps_taken));
  f.set("converged", std::string(t.converged ? "true" : "false"));
}

TrainedOuter trained_from_fixture(const Fixture& f) {
  TrainedOuter t;
  t.theta = f.vector("theta");
  t.method = trainer_from_string(f.text("method"));
  t.n_train = static_cast<std::size_t>(f.scalar("n_train"));
  t.residual = f.scalar("residual");
  t.steps_taken = static_cast<std::size_t>(f.scalar("steps_taken"));
  t.converged = f.text("converged") == "true";
  return t;
}

}  // namespace i2o::outer
