#include "i2o/instances.hpp"

#include <cmath>
#include <stdexcept>

#include "i2o/inner.hpp"

namespace i2o::theory {
namespace {

constexpr int kMaxResamples = 1000;

[[noreturn]] void give_up(const char* what) {
  throw std::runtime_error(std::string(what) + ": no acceptable draw after resampling");
}

double condition_number(const Matrix& m) {
  const Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

}  // namespace

outer::BilevelSetup attach_u(const QuadraticTemplate& t, const Matrix& u) {
  if (static_cast<std::size_t>(u.rows()) != t.rows()) {
    throw std::invalid_argument("attach_u: u must have as many rows as k");
  }
  outer::BilevelSetup s;
  if (linops::numerical_rank(t.k) == t.rows()) {
    s.inner = {t.k, t.k, u, t.c};
  } else {
    s.inner = inner::reduce_quadratic(t.k, u, t.c);
  }
  s.outer = t.outer;
  s.z0 = t.z0;
  s.eta = inner::default_step_size(s.inner);
  return s;
}

QuadraticTemplate strongly_convex_template(linops::SeededSource& src, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  const Matrix identity = Matrix::Identity(n, n);
  QuadraticTemplate t;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxResamples) give_up("strongly_convex_template k");
    t.k = identity + 0.1 * linops::gaussian_matrix(src, d, d);
    if (linops::numerical_rank(t.k) == d) break;
  }
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxResamples) give_up("strongly_convex_template k_out");
    const Matrix g = linops::gaussian_matrix(src, d, d);
    t.outer.k_out = identity + 0.05 * (g + g.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(t.outer.k_out, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() > 0.0) break;
  }
  t.c = linops::gaussian_vector(src, d);
  t.outer.omega = linops::gaussian_vector(src, d);
  t.z0 = linops::gaussian_vector(src, d);
  return t;
}

QuadraticTemplate rank_deficient_template(linops::SeededSource& src, std::size_t d_z,
                                          std::size_t inner_rank, std::size_t outer_rank) {
  if (inner_rank == 0 || inner_rank > d_z || outer_rank == 0 || outer_rank > d_z) {
    throw std::invalid_argument("rank_deficient_template: ranks must lie in [1, d_z]");
  }
  QuadraticTemplate t;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxResamples) give_up("rank_deficient_template k");
    t.k = linops::gaussian_matrix(src, d_z, inner_rank) *
          linops::gaussian_matrix(src, inner_rank, d_z) / std::sqrt(static_cast<double>(d_z));
    if (linops::numerical_rank(t.k) == inner_rank) break;
  }
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxResamples) give_up("rank_deficient_template k_out");
    t.outer.k_out = linops::gaussian_matrix(src, d_z, outer_rank) *
                    linops::gaussian_matrix(src, outer_rank, d_z) / std::sqrt(static_cast<double>(d_z));
    if (linops::numerical_rank(t.outer.k_out) == outer_rank) break;
  }
  t.c = linops::gaussian_vector(src, d_z);
  t.outer.omega = linops::gaussian_vector(src, d_z);
  t.z0 = linops::gaussian_vector(src, d_z);
  return t;
}

GeneralDims random_dims(linops::SeededSource& src, std::size_t max_dim) {
  if (max_dim == 0) throw std::invalid_argument("random_dims: max_dim must be positive");
  auto draw = [&](std::size_t hi) { return 1 + static_cast<std::size_t>(src.next_u64() % hi); };
  GeneralDims d;
  d.d_z = draw(max_dim);
  d.d_x = draw(d.d_z);
  d.d_theta = draw(max_dim);
  d.d_omega = draw(max_dim);
  return d;
}

outer::BilevelSetup random_valid_instance(linops::SeededSource& src, const GeneralDims& dims,
                                          bool gradient_form) {
  if (dims.d_x == 0 || dims.d_x > dims.d_z || dims.d_theta == 0 || dims.d_omega == 0) {
    throw std::invalid_argument("random_valid_instance: need 1 <= d_x <= d_z and positive dims");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dims.d_z));
  outer::BilevelSetup s;
  auto& p = s.inner;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxResamples) give_up("random_valid_instance");
    p.k_in = scale * linops::gaussian_matrix(src, dims.d_x, dims.d_z);
    if (condition_number(p.k_in) > 10.0) continue;
    if (gradient_form) {
      p.b = p.k_in;
      break;
    }
    p.b = p.k_in + 0.25 * scale * linops::gaussian_matrix(src, dims.d_x, dims.d_z);
    const auto spec = linops::spectrum(p.reduced_operator());
    if (spec.min_real_part >= 0.01 * spec.spectral_radius) break;
  }
  p.u = linops::gaussian_matrix(src, dims.d_x, dims.d_theta);
  p.c = linops::gaussian_vector(src, dims.d_x);
  s.outer.k_out = scale * linops::gaussian_matrix(src, dims.d_omega, dims.d_z);
  s.outer.omega = linops::gaussian_vector(src, dims.d_omega);
  s.z0 = linops::gaussian_vector(src, dims.d_z);
  s.eta = inner::default_step_size(p);
  return s;
}

}  // namespace i2o::theory
