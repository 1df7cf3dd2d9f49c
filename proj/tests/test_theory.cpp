#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "i2o/instances.hpp"
#include "i2o/theory.hpp"
#include "support.hpp"

using namespace i2o;
using i2o::testing::draw_count;
using i2o::testing::rel_err;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector scalar_vec(double v) { return Vector::Constant(1, v); }

outer::BilevelSetup scalar_setup(double u) {
  outer::BilevelSetup s;
  s.inner = {scalar(1.0), scalar(1.0), scalar(u), scalar_vec(1.0)};
  s.outer = {scalar(1.0), scalar_vec(1.0)};
  s.eta = 0.5;
  s.z0 = Vector::Zero(1);
  return s;
}

std::vector<std::uint64_t> seed_range(std::uint64_t count) {
  std::vector<std::uint64_t> seeds(count);
  std::iota(seeds.begin(), seeds.end(), 0);
  return seeds;
}

}  // namespace

TEST_CASE("scalar chain: bound and gap by hand") {
  // U = 0 freezes z_2 = -0.75 and the limit at -1; omega = 1.
  const auto s = scalar_setup(0.0);
  CHECK(theory::lower_bound(s, 2) == doctest::Approx(-1.53125).epsilon(1e-15));
  const auto t = theory::train(s, 2, outer::TrainerKind::closed_form);
  CHECK(theory::d_gap(s, t, 2, theory::kDeltaToConvergence) == doctest::Approx(0.46875).epsilon(1e-14));
  CHECK(theory::d_gap(s, t, 2, 0) == 0.0);
  // z_1 = -0.5: loss 1.125, so the gap is -0.40625, above the bound.
  CHECK(theory::d_gap(s, t, 2, -1) == doctest::Approx(-0.40625).epsilon(1e-14));
  CHECK_THROWS_AS(theory::d_gap(s, t, 2, -2), std::invalid_argument);
  CHECK_THROWS_AS(theory::d_gap(s, t, inner::kConverged, 3), std::invalid_argument);
}

TEST_CASE("bound vanishes with a surjective U or a reachable target") {
  CHECK(theory::lower_bound(scalar_setup(1.0), 2) == 0.0);
  linops::SeededSource src(51);
  for (int trial = 0; trial < 20; ++trial) {
    auto dims = theory::random_dims(src, 8);
    dims.d_theta = dims.d_x + draw_count(src, 0, 3);
    auto s = theory::random_valid_instance(src, dims);
    const std::size_t n = draw_count(src, 1, 30);
    CAPTURE(trial);
    CHECK(std::abs(theory::lower_bound(s, n)) <= 1e-12);

    dims.d_theta = 1;
    s = theory::random_valid_instance(src, dims);
    s.outer.omega = s.outer.k_out * inner::closed_form_state(s.inner, s.eta, s.z0, n).r_n;
    CHECK(std::abs(theory::lower_bound(s, n)) <= 1e-12 * (1.0 + s.outer.omega.squaredNorm()));
  }
}

TEST_CASE("gap never drops below the bound on random instances") {
  linops::SeededSource src(52);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = theory::random_valid_instance(src, theory::random_dims(src, 8));
    const std::size_t n = draw_count(src, 1, 15);
    auto grid = theory::full_delta_grid(n, static_cast<std::int64_t>(5 * n));
    grid.push_back(theory::kDeltaToConvergence);
    const auto report = theory::sweep(s, n, grid, outer::TrainerKind::closed_form, 0, false);
    CAPTURE(trial);
    for (const auto& row : report.rows) {
      CAPTURE(row.delta_n);
      CHECK(row.d_gap >= row.lower_bound - theory::bound_slack(row.lower_bound));
      CHECK(row.lower_bound <= 0.0);
    }
    CHECK_NOTHROW(theory::check_report(report));
  }
}

TEST_CASE("surjective U makes the training depth a minimizer") {
  linops::SeededSource src(53);
  for (int trial = 0; trial < 20; ++trial) {
    auto dims = theory::random_dims(src, 6);
    dims.d_theta = dims.d_x;
    const auto s = theory::random_valid_instance(src, dims);
    const std::size_t n = draw_count(src, 1, 10);
    const auto report = theory::sweep(s, n, theory::default_delta_grid(n, 100), outer::TrainerKind::closed_form);
    CAPTURE(trial);
    for (const auto& row : report.rows) CHECK(row.d_gap >= -1e-7 * (1.0 + row.loss_n));
  }
}

TEST_CASE("minimal loss equals the projector form") {
  linops::SeededSource src(54);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = theory::random_valid_instance(src, theory::random_dims(src, 10));
    const std::size_t n = draw_count(src, 1, 40);
    const auto t = outer::train_closed_form(s, n);
    CAPTURE(trial);
    CHECK(rel_err(outer::loss_at(s, t.theta, n), theory::minimal_loss_projector_form(s, n)) <= 1e-8);
  }
}

TEST_CASE("check_report names the offending row") {
  theory::I2OReport report;
  report.rows.push_back({7, 5, 3, 1.0, 0.5, -0.5, -0.1});
  try {
    theory::check_report(report);
    FAIL("expected InvariantViolation");
  } catch (const theory::InvariantViolation& e) {
    const std::string what = e.what();
    CHECK(what.find("seed 7") != std::string::npos);
    CHECK(what.find("delta_n 3") != std::string::npos);
  }
  CHECK_FALSE(theory::row_respects_bound({0, 5, 1, -1.0, 0.0, 1.0, 0.0}));
}

TEST_CASE("average-case right-hand side examples") {
  outer::BilevelSetup s;
  s.inner = {Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Constant(2, 1, 1.0), Vector::Ones(2)};
  Matrix k_out = Matrix::Zero(2, 2);
  k_out(0, 0) = 2.0;
  k_out(1, 1) = 1.0;
  s.outer = {k_out, Vector::Unit(2, 0)};
  s.eta = 0.5;
  s.z0 = Vector::Zero(2);
  // r_N = -(1 - 2^-N)(1, 1): ||r_max||^2 = 1.125 over {1, 2}; rho = 2, d_x = 2, d_theta = 1.
  CHECK(theory::avg_case_rhs(s, {1, 2}) == doctest::Approx(-0.8125).epsilon(1e-14));

  s.inner.u = Matrix::Identity(2, 2);
  CHECK(theory::avg_case_rhs(s, {1, 2}) == 0.0);

  s.inner.u = Matrix::Constant(2, 1, 1.0);
  s.inner.c = Vector::Zero(2);
  s.outer.omega = Vector::Zero(2);
  CHECK(theory::avg_case_rhs(s, {1, 2}) == 0.0);

  s.outer.k_out = Matrix::Identity(3, 2);
  s.outer.omega = Vector::Zero(3);
  CHECK_THROWS_AS(theory::avg_case_rhs(s, {1}), std::invalid_argument);
}

TEST_CASE("aggregate computes means, standard errors and the rhs comparison") {
  std::vector<theory::AvgCaseSample> samples{{0, 2, 10, -1.0, -0.5}, {1, 2, 10, -1.2, -0.5},
                                             {0, 4, 10, -3.0, -4.0}, {1, 4, 10, -1.0, -4.0}};
  const auto report = theory::aggregate(samples, 4, {1, 0});
  REQUIRE(report.cells.size() == 2);
  const auto& a = report.cell(2, 10);
  CHECK(a.count == 2);
  CHECK(a.mean_magnitude == doctest::Approx(1.1));
  CHECK(a.std_error == doctest::Approx(0.1));
  CHECK_FALSE(a.respects_rhs);
  const auto& b = report.cell(4, 10);
  CHECK(b.mean_magnitude == doctest::Approx(2.0));
  CHECK(b.std_error == doctest::Approx(1.0));
  CHECK(b.respects_rhs);
  CHECK(report.seeds == std::vector<std::uint64_t>{0, 1});
  CHECK(report.samples.front().seed == 0);
  CHECK_THROWS_AS(report.cell(3, 10), std::out_of_range);
  CHECK(report.variation_across_n(2) == 0.0);
}

TEST_CASE("Monte Carlo bound shrinks with d_theta and barely moves with N") {
  const std::vector<std::size_t> d_thetas{2, 5, 8, 10};
  const std::vector<std::size_t> ns{10, 50, 100};
  const auto report = theory::monte_carlo_avg_case(10, d_thetas, ns, seed_range(20));
  CHECK(report.samples.size() == 20 * d_thetas.size() * ns.size());
  for (const auto& c : report.cells) {
    CAPTURE(c.d_theta);
    CAPTURE(c.n);
    CHECK(c.respects_rhs);
    CHECK(c.mean_rhs.has_value());
  }
  for (const auto n : ns) {
    for (std::size_t i = 1; i < d_thetas.size(); ++i) {
      CHECK(report.cell(d_thetas[i], n).mean_magnitude < report.cell(d_thetas[i - 1], n).mean_magnitude);
    }
    CHECK(report.cell(10, n).mean_magnitude <= 1e-9);
  }
  for (const auto d : d_thetas) CHECK(report.variation_across_n(d) < 0.5);
}

TEST_CASE("Monte Carlo scan is independent of the thread count") {
  const auto a = theory::monte_carlo_avg_case(6, {1, 3}, {10, 20}, seed_range(8), 1);
  const auto b = theory::monte_carlo_avg_case(6, {1, 3}, {10, 20}, seed_range(8), 4);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].lower_bound == b.samples[i].lower_bound);
    CHECK(a.samples[i].rhs == b.samples[i].rhs);
  }
  CHECK_THROWS_AS(theory::monte_carlo_avg_case(6, {1}, {10}, {3, 3}), std::invalid_argument);
}

TEST_CASE("rank-deficient scan: the bound vanishes once d_theta reaches the outer rank") {
  const auto report = theory::non_strongly_convex_scan({10, 7, 4}, {2, 4, 6}, seed_range(10), {10, 50});
  for (const auto& s : report.samples) {
    CAPTURE(s.seed);
    CAPTURE(s.d_theta);
    CHECK_FALSE(s.rhs.has_value());
    if (s.d_theta >= 4) CHECK(std::abs(s.lower_bound) <= 1e-9);
  }
  const auto nonzero = std::count_if(report.samples.begin(), report.samples.end(), [](const auto& s) {
    return s.d_theta == 2 && std::abs(s.lower_bound) > 1e-9;
  });
  CHECK(nonzero == 20);
}

TEST_CASE("delta grids") {
  const auto g = theory::default_delta_grid(20, 200);
  CHECK(g.size() == 30);
  CHECK(g.front() == -19);
  CHECK(std::count(g.begin(), g.end(), 0) == 1);
  CHECK(g[g.size() - 2] == 200);
  CHECK(g.back() == theory::kDeltaToConvergence);
  CHECK(std::is_sorted(g.begin(), g.end()));

  const auto big = theory::default_delta_grid(100, 10);
  CHECK(big.front() == -99);
  CHECK(std::count_if(big.begin(), big.end(), [](auto d) { return d < 0; }) == 32);

  CHECK(theory::full_delta_grid(3, 2) == std::vector<std::int64_t>{-2, -1, 0, 1, 2});
  CHECK_THROWS_AS(theory::full_delta_grid(0, 2), std::invalid_argument);
}
