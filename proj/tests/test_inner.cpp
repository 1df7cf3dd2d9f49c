#include <cmath>
#include <limits>

#include "doctest.h"
#include "i2o/inner.hpp"
#include "i2o/instances.hpp"
#include "support.hpp"

using namespace i2o;
using i2o::testing::draw_count;
using i2o::testing::rel_err;

namespace {

inner::AffineInnerProblem scalar_problem(double k, double b, double u, double c) {
  return {Matrix::Constant(1, 1, k), Matrix::Constant(1, 1, b), Matrix::Constant(1, 1, u), Vector::Constant(1, c)};
}

// z <- z - eta K_in^T (B z + U theta + c), written out independently.
Vector recursion(const inner::AffineInnerProblem& p, const Vector& theta, double eta, Vector z, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) z -= eta * p.k_in.transpose() * (p.b * z + p.u * theta + p.c);
  return z;
}

outer::BilevelSetup random_setup(linops::SeededSource& src, std::size_t max_dim) {
  auto dims = theory::random_dims(src, max_dim);
  return theory::random_valid_instance(src, dims);
}

}  // namespace

TEST_CASE("validate reports each assumption") {
  CHECK(inner::validate(scalar_problem(1, 1, 1, 0)).ok());

  inner::AffineInnerProblem wide{Matrix::Identity(3, 2), Matrix::Identity(3, 2), Matrix::Identity(3, 1),
                                 Vector::Zero(3)};
  const auto d = inner::validate(wide);
  CHECK_FALSE(d.surjective);
  REQUIRE_FALSE(d.violations.empty());
  CHECK(d.violations.front().find("k_in cannot be surjective") != std::string::npos);

  const auto neg = inner::validate(scalar_problem(1, -1, 1, 0));
  CHECK_FALSE(neg.positive_spectrum);
  REQUIRE_FALSE(neg.violations.empty());
  CHECK(neg.violations.front().find("nonpositive real part") != std::string::npos);

  auto nan = scalar_problem(1, 1, 1, std::numeric_limits<double>::quiet_NaN());
  CHECK_FALSE(inner::validate(nan).finite);
  CHECK_THROWS_AS(inner::require_valid(nan), inner::InvalidProblem);

  inner::AffineInnerProblem rank_deficient{Matrix::Ones(2, 3), Matrix::Ones(2, 3), Matrix::Ones(2, 1),
                                           Vector::Zero(2)};
  CHECK_FALSE(inner::validate(rank_deficient).surjective);

  inner::AffineInnerProblem mismatched{Matrix::Identity(2, 2), Matrix::Identity(2, 3), Matrix::Ones(2, 1),
                                       Vector::Zero(2)};
  CHECK_FALSE(inner::validate(mismatched).shapes_consistent);
}

TEST_CASE("default_step_size examples") {
  CHECK(inner::default_step_size(scalar_problem(1, 1, 1, 0)) == doctest::Approx(1.8));
  inner::AffineInnerProblem diag{Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Ones(2, 1), Vector::Zero(2)};
  diag.b.diagonal() << 1.0, 4.0;
  CHECK(inner::default_step_size(diag) == doctest::Approx(0.45));
  for (const Eigen::Index d : {1, 3, 5}) {
    inner::AffineInnerProblem two{Matrix::Identity(d, d), 2.0 * Matrix::Identity(d, d), Matrix::Ones(d, 1),
                                  Vector::Zero(d)};
    CHECK(inner::default_step_size(two) == doctest::Approx(0.9));
  }
}

TEST_CASE("default_step_size contracts on random problems") {
  linops::SeededSource src(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_setup(src, 10);
    const Matrix h = s.inner.reduced_operator();
    const Matrix step = Matrix::Identity(h.rows(), h.cols()) - inner::default_step_size(s.inner) * h;
    CHECK(linops::spectrum(step).spectral_radius < 1.0);
  }
}

TEST_CASE("scalar iterate and closed form agree with the hand computation") {
  // f(z, theta) = z - theta, theta = 2, z0 = 0, eta = 0.5: 0 -> 1 -> 1.5.
  const auto p = scalar_problem(1, 1, -1, 0);
  const Vector theta = Vector::Constant(1, 2.0);
  CHECK(inner::iterate(p, theta, {0.5, Vector::Zero(1), 2})(0) == doctest::Approx(1.5));
  CHECK(inner::iterate(p, theta, {0.5, Vector::Constant(1, 7.0), 0})(0) == 7.0);
  CHECK(inner::iterate(p, theta, {0.5, Vector::Constant(1, 2.0), 9})(0) == 2.0);

  const auto proc = inner::closed_form_state(p, 0.5, Vector::Zero(1), 2);
  CHECK(proc.e_n(0, 0) == doctest::Approx(-0.75));
  CHECK(proc.r_n(0) == doctest::Approx(0.0));
  CHECK(inner::apply(proc, theta)(0) == doctest::Approx(1.5));
  CHECK(inner::apply(proc, Vector::Zero(1)) == proc.r_n);

  const auto zero = inner::closed_form_state(p, 0.5, Vector::Constant(1, 3.0), 0);
  CHECK(zero.e_n.isZero());
  CHECK(zero.r_n(0) == 3.0);
}

TEST_CASE("scalar chain with c = 1 reaches r_2 = -0.75 and the fixed point -1") {
  const auto p = scalar_problem(1, 1, 0, 1);
  CHECK(inner::closed_form_state(p, 0.5, Vector::Zero(1), 2).r_n(0) == doctest::Approx(-0.75));
  CHECK(inner::closed_form_state(p, 0.5, Vector::Zero(1), inner::kConverged).r_n(0) == doctest::Approx(-1.0));
}

TEST_CASE("closed form matches the literal recursion on random problems") {
  linops::SeededSource src(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_setup(src, 12);
    const std::size_t n = draw_count(src, 0, 200);
    const Vector theta = linops::gaussian_vector(src, s.inner.d_theta());
    const Vector want = recursion(s.inner, theta, s.eta, s.z0, n);
    const Vector got = inner::apply(inner::closed_form_state(s.inner, s.eta, s.z0, n), theta);
    CAPTURE(trial);
    CAPTURE(n);
    CHECK((got - want).norm() <= 1e-9 * (1.0 + want.norm()));
    CHECK(inner::iterate(s.inner, theta, {s.eta, s.z0, n}).isApprox(want, 1e-12));
  }
}

TEST_CASE("the limit solves f = 0 and E_N approaches -(B K_in^T)^{-1}") {
  linops::SeededSource src(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_setup(src, 8);
    const Vector theta = linops::gaussian_vector(src, s.inner.d_theta());
    const auto limit = inner::closed_form_state(s.inner, s.eta, s.z0, inner::kConverged);
    const Vector z = inner::apply(limit, theta);
    CHECK(inner::residual(s.inner, z, theta).norm() <= 1e-8 * (1.0 + z.norm()));

    const Matrix want = -s.inner.reduced_operator().inverse();
    const auto far = inner::closed_form_state(s.inner, s.eta, s.z0, 100'000'000);
    CHECK((far.e_n - want).norm() <= 1e-8 * (1.0 + want.norm()));
    CHECK((far.e_n - limit.e_n).norm() <= 1e-8 * (1.0 + want.norm()));
  }
}

TEST_CASE("iterates converge geometrically with the default step") {
  linops::SeededSource src(24);
  const auto s = theory::random_valid_instance(src, {4, 6, 3, 2}, true);
  const Vector theta = linops::gaussian_vector(src, s.inner.d_theta());
  Vector z = s.z0;
  double last_step = 0.0;
  for (std::size_t n = 0; n < 20000; ++n) {
    const Vector next = z - s.eta * inner::residual(s.inner, z, theta);
    last_step = (next - z).norm();
    z = next;
  }
  CHECK(last_step <= 1e-10);
  CHECK(inner::residual(s.inner, z, theta).norm() <= 1e-8);
}

TEST_CASE("apply is affine in theta") {
  linops::SeededSource src(25);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_setup(src, 10);
    const auto proc = inner::closed_form_state(s.inner, s.eta, s.z0, draw_count(src, 0, 50));
    const Vector t1 = linops::gaussian_vector(src, s.inner.d_theta());
    const Vector t2 = linops::gaussian_vector(src, s.inner.d_theta());
    const Vector zero = inner::apply(proc, Vector::Zero(s.inner.d_theta()));
    const Vector lhs = inner::apply(proc, t1 + t2) - zero;
    const Vector rhs = (inner::apply(proc, t1) - zero) + (inner::apply(proc, t2) - zero);
    CHECK((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    // Kernel directions of A_N leave the output unchanged.
    const Matrix a = inner::linear_part(proc);
    const Eigen::FullPivLU<Matrix> lu(a);
    const Matrix kernel = lu.kernel();
    if (lu.rank() < a.cols()) {
      const Vector moved = t1 + kernel.col(0);
      CHECK((inner::apply(proc, moved) - inner::apply(proc, t1)).norm() <= 1e-9 * (1.0 + kernel.norm()));
    }
  }
}

TEST_CASE("E_N is invertible past the threshold") {
  linops::SeededSource src(26);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = theory::random_valid_instance(src, theory::random_dims(src, 10), true);
    const auto n0 = inner::invertibility_threshold(s.inner, s.eta);
    for (const std::size_t n : {n0, n0 + 1, n0 + 10}) {
      const auto proc = inner::closed_form_state(s.inner, s.eta, s.z0, n);
      const double bound = 0.5 / linops::operator_norm(s.inner.reduced_operator());
      CHECK(linops::min_singular_value(proc.e_n) >= bound * (1.0 - 1e-9));
    }
  }
}

TEST_CASE("invertibility_threshold examples") {
  const auto p = scalar_problem(1, 1, 1, 0);
  CHECK(inner::invertibility_threshold(p, 0.9) == 1);
  CHECK(inner::invertibility_threshold(p, 0.4) == 2);
  CHECK(inner::invertibility_threshold(p, 1.0) == 1);
  CHECK_THROWS_AS(inner::invertibility_threshold(p, 2.0, 1000), std::runtime_error);
}

TEST_CASE("closed_form_state rejects bad inputs") {
  const auto p = scalar_problem(1, 1, 1, 0);
  CHECK_THROWS_AS(inner::closed_form_state(p, 0.0, Vector::Zero(1), 3), std::invalid_argument);
  CHECK_THROWS_AS(inner::closed_form_state(p, 0.5, Vector::Zero(2), 3), std::invalid_argument);
  CHECK_THROWS_AS(inner::closed_form_state(scalar_problem(1, -1, 1, 0), 0.5, Vector::Zero(1), 3),
                  inner::InvalidProblem);
  CHECK_THROWS_AS(inner::iterate(p, Vector::Zero(2), {0.5, Vector::Zero(1), 1}), std::invalid_argument);
}

TEST_CASE("reduce_quadratic keeps the gradient map") {
  linops::SeededSource src(27);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = draw_count(src, 1, 10), d_z = draw_count(src, 1, 10), d_t = draw_count(src, 1, 6);
    const std::size_t r = draw_count(src, 1, std::min(m, d_z));
    const Matrix k = i2o::testing::matrix_of_rank(src, m, d_z, r);
    const Matrix u = linops::gaussian_matrix(src, m, d_t);
    const Vector c = linops::gaussian_vector(src, m);
    const auto p = inner::reduce_quadratic(k, u, c);
    CHECK(p.d_x() == r);
    CHECK(inner::validate(p).ok());
    const Vector z = linops::gaussian_vector(src, d_z);
    const Vector theta = linops::gaussian_vector(src, d_t);
    const Vector want = k.transpose() * (k * z + u * theta + c);
    CHECK(rel_err(inner::residual(p, z, theta), want) <= 1e-10);
  }
}
