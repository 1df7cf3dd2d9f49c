#pragma once

// Inner-iterations overfitting as computable quantities: the loss change
// D(N, dN) = l(z_{N+dN}(theta*)) - l(z_N(theta*)) for a theta* trained at N,
// its lower bound
//   -1/2 ||(P(K_out K_in^T) - P(K_out K_in^T E_N U)) (K_out r_N - omega)||^2,
// the Gaussian average-case right-hand side, and the Monte Carlo scans.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "i2o/outer.hpp"

namespace i2o::theory {

/// dN standing for "run the inner problem to its exact fixed point".
inline constexpr std::int64_t kDeltaToConvergence = std::numeric_limits<std::int64_t>::max();

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double lower_bound(const outer::BilevelSetup& s, std::size_t n);

/// 1/2 ||(P(C) - P(C E_N U)) v_N||^2 + 1/2 ||P(C^perp) v_N||^2 with
/// C = K_out K_in^T and v_N = K_out r_N - omega: the loss at a minimizer
/// trained with N inner iterations.
double minimal_loss_projector_form(const outer::BilevelSetup& s, std::size_t n);

/// D(n, delta_n) at the trained theta. Requires delta_n > -n.
double d_gap(const outer::BilevelSetup& s, const outer::TrainedOuter& trained, std::size_t n,
             std::int64_t delta_n);

/// Dispatches to the matching trainer with its default options.
outer::TrainedOuter train(const outer::BilevelSetup& s, std::size_t n, outer::TrainerKind kind);

/// IFT descent against unrolled descent on the same instance and N.
struct TrainerComparison {
  std::size_t n = 0;
  double loss_ift = 0.0;
  double loss_unrolled = 0.0;
  double loss_closed_form = 0.0;
  double residual_ift = 0.0;       // characterization residual
  double residual_unrolled = 0.0;  // characterization residual
  std::size_t steps_ift = 0;
  std::size_t steps_unrolled = 0;

  /// |loss_ift - loss_unrolled| <= 1e-7 (1 + loss_unrolled) and both
  /// residuals <= 1e-6.
  bool equivalent() const;
};

TrainerComparison compare_trainers(const outer::BilevelSetup& s, std::size_t n,
                                   std::size_t outer_steps = 1'000'000);

struct I2ORow {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::int64_t delta_n = 0;
  double loss_n = 0.0;
  double loss_n_dn = 0.0;
  double d_gap = 0.0;
  double lower_bound = 0.0;

  friend bool operator==(const I2ORow&, const I2ORow&) = default;
};

struct I2OReport {
  std::vector<I2ORow> rows;
  std::size_t d_x = 0;
  std::size_t d_z = 0;
  std::size_t d_theta = 0;
  std::size_t d_omega = 0;
  double eta = 0.0;
  outer::TrainerKind trainer = outer::TrainerKind::closed_form;
};

/// Allowed slack in d_gap >= lower_bound.
inline double bound_slack(double lower_bound) { return 1e-7 * (1.0 + std::abs(lower_bound)); }

bool row_respects_bound(const I2ORow& row);

/// Throws InvariantViolation naming the first offending row.
void check_report(const I2OReport& report);

/// One row per grid entry. Rows are checked against the bound on
/// construction unless check is false.
I2OReport sweep(const outer::BilevelSetup& s, std::size_t n, const std::vector<std::int64_t>& delta_grid,
                outer::TrainerKind trainer, std::uint64_t seed = 0, bool check = true);

/// Linear on the negative side (-n+1 .. -1), 0, geometric on the positive
/// side up to max_delta, then kDeltaToConvergence.
std::vector<std::int64_t> default_delta_grid(std::size_t n, std::int64_t max_delta);

/// Every integer in [-n+1, max_delta].
std::vector<std::int64_t> full_delta_grid(std::size_t n, std::int64_t max_delta);

/// -1/2 (1 - min(d_x, d_theta) / d_x) (rho(K_out) ||r_max||^2 + ||omega||^2)
/// with ||r_max||^2 the largest ||r_N||^2 over n_grid. Requires K_in
/// invertible and l strongly convex (square K_out).
double avg_case_rhs(const outer::BilevelSetup& s, const std::vector<std::size_t>& n_grid);

struct AvgCaseSample {
  std::uint64_t seed = 0;
  std::size_t d_theta = 0;
  std::size_t n = 0;
  double lower_bound = 0.0;
  /// Absent when the average-case hypotheses do not hold.
  std::optional<double> rhs;
};

struct AvgCaseCell {
  std::size_t d_theta = 0;
  std::size_t n = 0;
  std::size_t count = 0;
  double mean_magnitude = 0.0;
  double std_error = 0.0;
  std::optional<double> mean_rhs;
  /// mean bound >= mean rhs - 3 standard errors - 1e-12 (1 + |mean rhs|).
  bool respects_rhs = true;
};

struct AvgCaseReport {
  std::vector<AvgCaseSample> samples;  // sorted by (seed, d_theta, n)
  std::vector<AvgCaseCell> cells;      // sorted by (d_theta, n)
  std::size_t d_z = 0;
  std::vector<std::uint64_t> seeds;

  const AvgCaseCell& cell(std::size_t d_theta, std::size_t n) const;
  /// Coefficient of variation of the cell means across n, for one d_theta.
  double variation_across_n(std::size_t d_theta) const;
};

/// Aggregates samples into cells; samples must carry the same (d_theta, n)
/// pairs for every seed.
AvgCaseReport aggregate(std::vector<AvgCaseSample> samples, std::size_t d_z,
                        std::vector<std::uint64_t> seeds);

/// Strongly convex problems of dimension d_z (d_x = d_z = d_omega), one
/// template per seed and a fresh Gaussian U per (seed, d_theta).
AvgCaseReport monte_carlo_avg_case(std::size_t d_z, const std::vector<std::size_t>& d_theta_grid,
                                   const std::vector<std::size_t>& n_grid,
                                   const std::vector<std::uint64_t>& seeds, std::size_t threads = 1);

struct RankDeficientDims {
  std::size_t d_z = 10;
  std::size_t inner_rank = 7;
  std::size_t outer_rank = 4;
};

/// Same aggregation for rank-deficient inner and outer problems; no
/// right-hand side is attached.
AvgCaseReport non_strongly_convex_scan(const RankDeficientDims& dims,
                                       const std::vector<std::size_t>& d_theta_grid,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::vector<std::size_t>& n_grid = {10, 50, 100, 200},
                                       std::size_t threads = 1);

}  // namespace i2o::theory
