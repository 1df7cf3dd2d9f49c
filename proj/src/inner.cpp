#include "i2o/inner.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace i2o::inner {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_dim(Eigen::Index got, std::size_t want, const char* what) {
  if (static_cast<std::size_t>(got) != want) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(want) +
                                ", got " + std::to_string(got));
  }
}

}  // namespace

InnerDiagnostics validate(const AffineInnerProblem& p) {
  InnerDiagnostics d;
  const Eigen::Index dx = p.k_in.rows();
  d.shapes_consistent = dx >= 1 && p.k_in.cols() >= 1 && p.b.rows() == dx &&
                        p.b.cols() == p.k_in.cols() && p.u.rows() == dx && p.u.cols() >= 1 &&
                        p.c.size() == dx;
  if (!d.shapes_consistent) {
    d.violations.push_back("inconsistent shapes: k_in " + shape(p.k_in) + ", b " + shape(p.b) +
                           ", u " + shape(p.u) + ", c " + std::to_string(p.c.size()));
    return d;
  }
  d.finite = p.k_in.allFinite() && p.b.allFinite() && p.u.allFinite() && p.c.allFinite();
  if (!d.finite) {
    d.violations.emplace_back("non-finite entries");
    return d;
  }

  d.rank_k_in = linops::numerical_rank(p.k_in);
  d.surjective = d.rank_k_in == p.d_x();
  if (p.d_x() > p.d_z()) {
    d.violations.push_back("k_in cannot be surjective: d_x = " + std::to_string(p.d_x()) +
                           " > d_z = " + std::to_string(p.d_z()));
  } else if (!d.surjective) {
    d.violations.push_back("k_in is not surjective: rank " + std::to_string(d.rank_k_in) +
                           " < d_x = " + std::to_string(p.d_x()));
  }

  d.spectrum = linops::spectrum(p.reduced_operator());
  d.positive_spectrum = d.spectrum.min_real_part > kSpectralTol;
  if (!d.positive_spectrum) {
    d.violations.push_back("b k_in^T has an eigenvalue with nonpositive real part (min " +
                           format_double(d.spectrum.min_real_part) + ")");
  }
  return d;
}

void require_valid(const AffineInnerProblem& p) {
  const auto d = validate(p);
  if (d.ok()) return;
  std::string message = "invalid affine inner problem:";
  for (const auto& v : d.violations) message += " " + v + ";";
  throw InvalidProblem(message);
}

Vector residual(const AffineInnerProblem& p, const Vector& z, const Vector& theta) {
  require_dim(z.size(), p.d_z(), "residual z");
  require_dim(theta.size(), p.d_theta(), "residual theta");
  return p.k_in.transpose() * (p.b * z + p.u * theta + p.c);
}

double default_step_size(const AffineInnerProblem& p) {
  const auto d = validate(p);
  if (!d.ok()) require_valid(p);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& lambda : d.spectrum.eigenvalues) {
    best = std::min(best, 2.0 * lambda.real() / std::norm(lambda));
  }
  return 0.9 * best;
}

Vector iterate(const AffineInnerProblem& p, const Vector& theta, const FixedPointConfig& cfg) {
  require_dim(theta.size(), p.d_theta(), "iterate theta");
  require_dim(cfg.z0.size(), p.d_z(), "iterate z0");
  const Vector drive = p.u * theta + p.c;
  Vector z = cfg.z0;
  for (std::size_t k = 0; k < cfg.n; ++k) {
    z -= cfg.eta * (p.k_in.transpose() * (p.b * z + drive));
  }
  return z;
}

LinearProcedure closed_form_state(const AffineInnerProblem& p, double eta, const Vector& z0,
                                  std::size_t n) {
  require_valid(p);
  require_dim(z0.size(), p.d_z(), "closed_form_state z0");
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw std::invalid_argument("closed_form_state: eta must be positive and finite");
  }
  const Matrix h_bar = p.reduced_operator();
  const Eigen::JacobiSVD<Matrix> svd(h_bar);
  const Vector& s = svd.singularValues();
  if (s(s.size() - 1) <= 1e-12 * s(0)) {
    throw std::domain_error("closed_form_state: b k_in^T is numerically singular");
  }
  const Matrix h_bar_inv = h_bar.partialPivLu().inverse();
  const auto dx = static_cast<Eigen::Index>(p.d_x());
  const Matrix identity = Matrix::Identity(dx, dx);

  LinearProcedure proc;
  if (n == kConverged) {
    proc.e_n = -h_bar_inv;
  } else {
    const Matrix step = identity - eta * h_bar;
    proc.e_n = (linops::matrix_power(step, n) - identity) * h_bar_inv;
  }
  proc.r_n = p.k_in.transpose() * (proc.e_n * (p.c + p.b * z0)) + z0;
  proc.n = n;
  proc.problem = p;
  proc.eta = eta;
  return proc;
}

Vector apply(const LinearProcedure& proc, const Vector& theta) {
  require_dim(theta.size(), proc.problem.d_theta(), "apply theta");
  return proc.problem.k_in.transpose() * (proc.e_n * (proc.problem.u * theta)) + proc.r_n;
}

Matrix linear_part(const LinearProcedure& proc) {
  return proc.problem.k_in.transpose() * proc.e_n * proc.problem.u;
}

std::size_t invertibility_threshold(const AffineInnerProblem& p, double eta, std::size_t n_max) {
  require_valid(p);
  const auto dx = static_cast<Eigen::Index>(p.d_x());
  const Matrix step = Matrix::Identity(dx, dx) - eta * p.reduced_operator();
  Matrix power = Matrix::Identity(dx, dx);
  for (std::size_t n = 0; n <= n_max; ++n) {
    if (linops::operator_norm(power) < 0.5) return n;
    power = power * step;
    if (!power.allFinite()) break;
  }
  throw std::runtime_error("invertibility_threshold: ||(I - eta B K_in^T)^N|| < 0.5 not reached within " +
                           std::to_string(n_max) + " iterations");
}

AffineInnerProblem reduce_quadratic(const Matrix& k, const Matrix& u, const Vector& c) {
  if (u.rows() != k.rows() || c.size() != k.rows()) {
    throw std::invalid_argument("reduce_quadratic: k, u and c must share their row count");
  }
  linops::require_finite(k, "reduce_quadratic k");
  const Eigen::JacobiSVD<Matrix> svd(k, Eigen::ComputeThinU);
  const auto r = static_cast<Eigen::Index>(linops::numerical_rank(k));
  if (r == 0) throw InvalidProblem("reduce_quadratic: k is zero");
  const Matrix q_t = svd.matrixU().leftCols(r).transpose();
  AffineInnerProblem p;
  p.k_in = q_t * k;
  p.b = p.k_in;
  p.u = q_t * u;
  p.c = q_t * c;
  return p;
}

Fixture to_fixture(const AffineInnerProblem& p) {
  Fixture f;
  f.set("k_in", p.k_in);
  f.set("b", p.b);
  f.set("u", p.u);
  f.set("c", p.c);
  return f;
}

AffineInnerProblem problem_from_fixture(const Fixture& f) {
  return {f.matrix("k_in"), f.matrix("b"), f.matrix("u"), f.vector("c")};
}

}  // namespace i2o::inner
