#include "i2o/theory.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <utility>

#include "i2o/instances.hpp"
#include "i2o/parallel.hpp"

namespace i2o::theory {
namespace {

struct BoundTerms {
  Matrix p_c;
  Matrix p_ceu;
  Vector v;
};

BoundTerms bound_terms(const outer::BilevelSetup& s, std::size_t n) {
  outer::require_consistent(s);
  const auto proc = inner::closed_form_state(s.inner, s.eta, s.z0, n);
  const Matrix c = s.outer.k_out * s.inner.k_in.transpose();
  return {linops::proj_range(c), linops::proj_range(c * proc.e_n * s.inner.u),
          s.outer.k_out * proc.r_n - s.outer.omega};
}

std::size_t evaluation_point(std::size_t n, std::int64_t delta_n) {
  if (delta_n == kDeltaToConvergence) return inner::kConverged;
  if (n == inner::kConverged) {
    throw std::invalid_argument("d_gap: a converged training point only admits delta_n = 0 or infinity");
  }
  if (delta_n <= -static_cast<std::int64_t>(n)) {
    throw std::invalid_argument("d_gap: delta_n = " + std::to_string(delta_n) + " must exceed -n = -" +
                                std::to_string(n));
  }
  return static_cast<std::size_t>(static_cast<std::int64_t>(n) + delta_n);
}

std::string describe(const I2ORow& r) {
  return "seed " + std::to_string(r.seed) + ", n " + std::to_string(r.n) + ", delta_n " +
         (r.delta_n == kDeltaToConvergence ? std::string("inf") : std::to_string(r.delta_n));
}

}  // namespace

double lower_bound(const outer::BilevelSetup& s, std::size_t n) {
  const auto t = bound_terms(s, n);
  return -0.5 * ((t.p_c - t.p_ceu) * t.v).squaredNorm();
}

double minimal_loss_projector_form(const outer::BilevelSetup& s, std::size_t n) {
  const auto t = bound_terms(s, n);
  const Vector outside = t.v - t.p_c * t.v;
  return 0.5 * ((t.p_c - t.p_ceu) * t.v).squaredNorm() + 0.5 * outside.squaredNorm();
}

double d_gap(const outer::BilevelSetup& s, const outer::TrainedOuter& trained, std::size_t n,
             std::int64_t delta_n) {
  const std::size_t n_eval = evaluation_point(n, delta_n);
  if (delta_n == 0) return 0.0;
  return outer::loss_at(s, trained.theta, n_eval) - outer::loss_at(s, trained.theta, n);
}

outer::TrainedOuter train(const outer::BilevelSetup& s, std::size_t n, outer::TrainerKind kind) {
  switch (kind) {
    case outer::TrainerKind::closed_form: return outer::train_closed_form(s, n);
    case outer::TrainerKind::unrolled_gd: return outer::train_unrolled_gd(s, n);
    case outer::TrainerKind::ift_gd: return outer::train_ift(s, n);
  }
  throw std::invalid_argument("train: unknown trainer");
}

bool TrainerComparison::equivalent() const {
  return std::abs(loss_ift - loss_unrolled) <= 1e-7 * (1.0 + loss_unrolled) && residual_ift <= 1e-6 &&
         residual_unrolled <= 1e-6;
}

TrainerComparison compare_trainers(const outer::BilevelSetup& s, std::size_t n, std::size_t outer_steps) {
  outer::GradientDescentOptions gd;
  gd.outer_steps = outer_steps;
  outer::IftOptions ift;
  ift.outer_steps = outer_steps;
  const auto unrolled = outer::train_unrolled_gd(s, n, gd);
  const auto implicit = outer::train_ift(s, n, ift);
  const auto closed = outer::train_closed_form(s, n);

  TrainerComparison c;
  c.n = n;
  c.loss_ift = outer::loss_at(s, implicit.theta, n);
  c.loss_unrolled = outer::loss_at(s, unrolled.theta, n);
  c.loss_closed_form = outer::loss_at(s, closed.theta, n);
  c.residual_ift = outer::characterization_residual(s, n, implicit.theta);
  c.residual_unrolled = outer::characterization_residual(s, n, unrolled.theta);
  c.steps_ift = implicit.steps_taken;
  c.steps_unrolled = unrolled.steps_taken;
  return c;
}

bool row_respects_bound(const I2ORow& row) {
  const bool finite = std::isfinite(row.loss_n) && std::isfinite(row.loss_n_dn) &&
                      std::isfinite(row.d_gap) && std::isfinite(row.lower_bound);
  return finite && row.loss_n >= 0.0 && row.loss_n_dn >= 0.0 &&
         row.d_gap >= row.lower_bound - bound_slack(row.lower_bound);
}

void check_report(const I2OReport& report) {
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    if (!row_respects_bound(r)) {
      throw InvariantViolation("row " + std::to_string(i) + " (" + describe(r) + "): d_gap " +
                               format_double(r.d_gap) + " against lower bound " +
                               format_double(r.lower_bound) + ", losses " + format_double(r.loss_n) +
                               " and " + format_double(r.loss_n_dn));
    }
  }
}

I2OReport sweep(const outer::BilevelSetup& s, std::size_t n, const std::vector<std::int64_t>& delta_grid,
                outer::TrainerKind trainer, std::uint64_t seed, bool check) {
  if (delta_grid.empty()) throw std::invalid_argument("sweep: empty delta grid");
  for (const auto dn : delta_grid) evaluation_point(n, dn);

  I2OReport report;
  report.d_x = s.inner.d_x();
  report.d_z = s.inner.d_z();
  report.d_theta = s.inner.d_theta();
  report.d_omega = s.outer.d_omega();
  report.eta = s.eta;
  report.trainer = trainer;

  const auto trained = train(s, n, trainer);
  const double bound = lower_bound(s, n);
  const double loss_n = outer::loss_at(s, trained.theta, n);
  report.rows.reserve(delta_grid.size());
  for (const auto dn : delta_grid) {
    I2ORow row{seed, n, dn, loss_n, loss_n, 0.0, bound};
    if (dn != 0) {
      row.loss_n_dn = outer::loss_at(s, trained.theta, evaluation_point(n, dn));
      row.d_gap = row.loss_n_dn - loss_n;
    }
    report.rows.push_back(row);
  }
  if (check) check_report(report);
  return report;
}

std::vector<std::int64_t> default_delta_grid(std::size_t n, std::int64_t max_delta) {
  if (n == 0) throw std::invalid_argument("default_delta_grid: n must be positive");
  const auto ni = static_cast<std::int64_t>(n);
  std::vector<std::int64_t> grid;
  constexpr std::int64_t kNegativePoints = 32;
  const std::int64_t span = ni - 1;
  if (span <= kNegativePoints) {
    for (std::int64_t d = -span; d < 0; ++d) grid.push_back(d);
  } else {
    for (std::int64_t k = 0; k < kNegativePoints; ++k) grid.push_back(-span + k * span / kNegativePoints);
  }
  grid.push_back(0);
  for (std::int64_t d = 1; d < max_delta; d *= 2) grid.push_back(d);
  if (max_delta > 0) grid.push_back(max_delta);
  grid.push_back(kDeltaToConvergence);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::vector<std::int64_t> full_delta_grid(std::size_t n, std::int64_t max_delta) {
  if (n == 0) throw std::invalid_argument("full_delta_grid: n must be positive");
  std::vector<std::int64_t> grid;
  for (std::int64_t d = 1 - static_cast<std::int64_t>(n); d <= max_delta; ++d) grid.push_back(d);
  return grid;
}

double avg_case_rhs(const outer::BilevelSetup& s, const std::vector<std::size_t>& n_grid) {
  outer::require_consistent(s);
  if (n_grid.empty()) throw std::invalid_argument("avg_case_rhs: empty n grid");
  const auto& p = s.inner;
  if (p.d_x() != p.d_z() || linops::numerical_rank(p.k_in) != p.d_z()) {
    throw std::invalid_argument("avg_case_rhs: k_in must be square and invertible");
  }
  if (s.outer.d_omega() != s.outer.d_z() || !s.outer.strongly_convex()) {
    throw std::invalid_argument("avg_case_rhs: k_out must be square and invertible (strongly convex loss)");
  }
  double r_max = 0.0;
  for (const auto n : n_grid) {
    r_max = std::max(r_max, inner::closed_form_state(p, s.eta, s.z0, n).r_n.squaredNorm());
  }
  const double rho = linops::spectrum(s.outer.k_out).spectral_radius;
  const double d_x = static_cast<double>(p.d_x());
  const double prefactor = 1.0 - static_cast<double>(std::min(p.d_x(), p.d_theta())) / d_x;
  return -0.5 * prefactor * (rho * r_max + s.outer.omega.squaredNorm());
}

const AvgCaseCell& AvgCaseReport::cell(std::size_t d_theta, std::size_t n) const {
  for (const auto& c : cells) {
    if (c.d_theta == d_theta && c.n == n) return c;
  }
  throw std::out_of_range("AvgCaseReport: no cell for d_theta " + std::to_string(d_theta) + ", n " +
                          std::to_string(n));
}

double AvgCaseReport::variation_across_n(std::size_t d_theta) const {
  std::vector<double> means;
  for (const auto& c : cells) {
    if (c.d_theta == d_theta) means.push_back(c.mean_magnitude);
  }
  if (means.empty()) throw std::out_of_range("AvgCaseReport: no cells for d_theta " + std::to_string(d_theta));
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
  if (mean <= 1e-12) return 0.0;
  double var = 0.0;
  for (const double m : means) var += (m - mean) * (m - mean);
  return std::sqrt(var / static_cast<double>(means.size())) / mean;
}

AvgCaseReport aggregate(std::vector<AvgCaseSample> samples, std::size_t d_z, std::vector<std::uint64_t> seeds) {
  auto key = [](const AvgCaseSample& a) { return std::tie(a.seed, a.d_theta, a.n); };
  std::sort(samples.begin(), samples.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  std::sort(seeds.begin(), seeds.end());

  std::map<std::pair<std::size_t, std::size_t>, std::vector<const AvgCaseSample*>> groups;
  for (const auto& s : samples) groups[{s.d_theta, s.n}].push_back(&s);

  AvgCaseReport report;
  for (const auto& [where, group] : groups) {
    AvgCaseCell c;
    c.d_theta = where.first;
    c.n = where.second;
    c.count = group.size();
    const double count = static_cast<double>(c.count);
    double sum = 0.0;
    for (const auto* s : group) sum += -s->lower_bound;
    c.mean_magnitude = sum / count;
    if (c.count > 1) {
      double var = 0.0;
      for (const auto* s : group) var += (-s->lower_bound - c.mean_magnitude) * (-s->lower_bound - c.mean_magnitude);
      c.std_error = std::sqrt(var / (count - 1.0) / count);
    }
    const bool all_rhs = std::all_of(group.begin(), group.end(), [](const auto* s) { return s->rhs.has_value(); });
    if (all_rhs) {
      double rhs = 0.0;
      for (const auto* s : group) rhs += *s->rhs;
      c.mean_rhs = rhs / count;
      const double margin = 3.0 * c.std_error + 1e-12 * (1.0 + std::abs(*c.mean_rhs));
      c.respects_rhs = -c.mean_magnitude >= *c.mean_rhs - margin;
    }
    report.cells.push_back(c);
  }
  report.samples = std::move(samples);
  report.d_z = d_z;
  report.seeds = std::move(seeds);
  return report;
}

namespace {

template <class MakeTemplate>
AvgCaseReport scan(std::size_t d_z, const std::vector<std::size_t>& d_theta_grid,
                   const std::vector<std::size_t>& n_grid, const std::vector<std::uint64_t>& seeds,
                   std::size_t threads, bool with_rhs, MakeTemplate&& make_template) {
  if (d_theta_grid.empty() || n_grid.empty() || seeds.empty()) {
    throw std::invalid_argument("scan: d_theta grid, n grid and seed list must be non-empty");
  }
  for (const auto d : d_theta_grid) {
    if (d == 0) throw std::invalid_argument("scan: d_theta must be positive");
  }
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("scan: seeds must be distinct");
  }

  const std::size_t per_seed = d_theta_grid.size() * n_grid.size();
  std::vector<AvgCaseSample> samples(sorted.size() * per_seed);
  parallel_for(sorted.size(), threads, [&](std::size_t i) {
    const std::uint64_t seed = sorted[i];
    const linops::SeededSource root(seed);
    auto problem_src = root.child(0);
    const QuadraticTemplate t = make_template(problem_src);
    std::size_t slot = i * per_seed;
    for (const auto d_theta : d_theta_grid) {
      auto u_src = root.child(1 + d_theta);
      const auto setup = attach_u(t, linops::gaussian_matrix(u_src, t.rows(), d_theta));
      std::optional<double> rhs;
      if (with_rhs) rhs = avg_case_rhs(setup, n_grid);
      for (const auto n : n_grid) {
        samples[slot++] = {seed, d_theta, n, lower_bound(setup, n), rhs};
      }
    }
  });
  return aggregate(std::move(samples), d_z, std::move(sorted));
}

}  // namespace

AvgCaseReport monte_carlo_avg_case(std::size_t d_z, const std::vector<std::size_t>& d_theta_grid,
                                   const std::vector<std::size_t>& n_grid,
                                   const std::vector<std::uint64_t>& seeds, std::size_t threads) {
  if (d_z == 0) throw std::invalid_argument("monte_carlo_avg_case: d_z must be positive");
  return scan(d_z, d_theta_grid, n_grid, seeds, threads, true,
              [d_z](linops::SeededSource& src) { return strongly_convex_template(src, d_z); });
}

AvgCaseReport non_strongly_convex_scan(const RankDeficientDims& dims,
                                       const std::vector<std::size_t>& d_theta_grid,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::vector<std::size_t>& n_grid, std::size_t threads) {
  return scan(dims.d_z, d_theta_grid, n_grid, seeds, threads, false, [&dims](linops::SeededSource& src) {
    return rank_deficient_template(src, dims.d_z, dims.inner_rank, dims.outer_rank);
  });
}

}  // namespace i2o::theory
