// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "i2o/cli/commands.hpp"
#include "i2o/instances.hpp"
#include "i2o/linops.hpp"
#include "i2o/respoly.hpp"
#include "i2o/theory.hpp"
#include "support.hpp"

using namespace i2o;
using i2o::testing::draw_count;
using i2o::testing::rel_err;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;  // 0 means no runtime limit
  std::function<Verdict()> check;
};

std::vector<std::uint64_t> seed_range(std::uint64_t count) {
  std::vector<std::uint64_t> seeds(count);
  std::iota(seeds.begin(), seeds.end(), 0);
  return seeds;
}

std::string sci(double x) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << x;
  return s.str();
}

// ------------------------------------------------------------- criterion 1

Verdict surjective_u_minimum() {
  constexpr std::size_t n = 20;
  const auto grid = theory::full_delta_grid(n, 200);
  double worst_min = 0.0;
  std::size_t misplaced = 0;
  for (const auto seed : seed_range(20)) {
    const linops::SeededSource root(seed);
    auto src = root.child(0);
    const auto t = theory::rank_deficient_template(src, 5, 3, 3);
    auto u_src = root.child(1 + 4);
    const auto s = theory::attach_u(t, linops::gaussian_matrix(u_src, t.rows(), 4));
    const auto report = theory::sweep(s, n, grid, outer::TrainerKind::closed_form, seed, false);
    const auto best = std::min_element(report.rows.begin(), report.rows.end(),
                                       [](const auto& a, const auto& b) { return a.d_gap < b.d_gap; });
    worst_min = std::min(worst_min, best->d_gap);
    // The row at delta_n = 0 must reach the grid minimum.
    if (best->d_gap < -1e-7) ++misplaced;
  }
  return {worst_min >= -1e-7 && misplaced == 0,
          "worst grid minimum " + sci(worst_min) + ", instances with a minimum below D(N, 0): " +
              std::to_string(misplaced)};
}

// ------------------------------------------------------------- criterion 2

Verdict theorem_one_bound() {
  linops::SeededSource src(2024);
  std::size_t rows = 0, violations = 0;
  for (int i = 0; i < 50; ++i) {
    const auto s = theory::random_valid_instance(src, theory::random_dims(src, 12));
    const std::size_t n = draw_count(src, 1, 20);
    auto grid = theory::full_delta_grid(n, static_cast<std::int64_t>(5 * n));
    grid.push_back(theory::kDeltaToConvergence);
    const auto report = theory::sweep(s, n, grid, outer::TrainerKind::closed_form, static_cast<std::uint64_t>(i), false);
    for (const auto& r : report.rows) {
      ++rows;
      if (!theory::row_respects_bound(r)) ++violations;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(rows) + " rows"};
}

// ---------------------------------------------------------- criteria 3 and 4

const std::vector<std::size_t> kDThetas{2, 5, 10, 15, 20};
const std::vector<std::size_t> kNs{10, 50, 100, 200};

Verdict average_case_trend() {
  const auto report = theory::monte_carlo_avg_case(20, kDThetas, kNs, seed_range(20), cli::worker_count());
  bool monotone = true;
  for (const auto n : kNs) {
    for (std::size_t i = 1; i < kDThetas.size(); ++i) {
      if (report.cell(kDThetas[i], n).mean_magnitude > report.cell(kDThetas[i - 1], n).mean_magnitude) {
        monotone = false;
      }
    }
  }
  double at_full = 0.0;
  for (const auto n : kNs) at_full = std::max(at_full, report.cell(20, n).mean_magnitude);
  double worst_cv = 0.0;
  for (const auto d : kDThetas) worst_cv = std::max(worst_cv, report.variation_across_n(d));
  std::ostringstream detail;
  detail << "means at N=10:";
  for (const auto d : kDThetas) detail << ' ' << sci(report.cell(d, 10).mean_magnitude);
  detail << "; non-increasing " << (monotone ? "yes" : "no") << ", max at d_theta=20 " << sci(at_full)
         << ", worst CV " << sci(worst_cv);
  return {monotone && at_full <= 1e-8 && worst_cv <= 0.5, detail.str()};
}

Verdict average_case_rhs() {
  const auto report = theory::monte_carlo_avg_case(20, kDThetas, kNs, seed_range(200), cli::worker_count());
  std::size_t failing = 0;
  double tightest = std::numeric_limits<double>::infinity();
  for (const auto& c : report.cells) {
    if (!c.mean_rhs || !c.respects_rhs) ++failing;
    if (c.mean_rhs) {
      const double allowed = 3.0 * c.std_error + 1e-12 * (1.0 + std::abs(*c.mean_rhs));
      tightest = std::min(tightest, -c.mean_magnitude - *c.mean_rhs + allowed);
    }
  }
  return {failing == 0, std::to_string(failing) + " of " + std::to_string(report.cells.size()) +
                            " cells below rhs - 3 SE; smallest margin " + sci(tightest)};
}

// ------------------------------------------------------------- criterion 5

Verdict rank_deficient_scan() {
  std::vector<std::size_t> d_thetas(10);
  std::iota(d_thetas.begin(), d_thetas.end(), 1);
  const std::vector<std::size_t> ns{10, 50, 100, 200};
  const auto report = theory::non_strongly_convex_scan({10, 7, 4}, d_thetas, seed_range(20), ns, cli::worker_count());
  std::size_t smallest = 0;
  std::size_t hits = 0;
  for (const auto d : d_thetas) {
    if (d >= 10) continue;
    for (const auto seed : report.seeds) {
      const bool vanishes = std::all_of(report.samples.begin(), report.samples.end(), [&](const auto& s) {
        return s.seed != seed || s.d_theta != d || std::abs(s.lower_bound) <= 1e-9;
      });
      if (vanishes) {
        ++hits;
        if (smallest == 0) smallest = d;
      }
    }
  }
  return {hits > 0, "smallest d_theta < 10 with a vanishing bound: " +
                        (smallest ? std::to_string(smallest) : std::string("none")) + "; " +
                        std::to_string(hits) + " (seed, d_theta) pairs below 1e-9"};
}

// ------------------------------------------------------------- criterion 6

Verdict ift_matches_unrolled() {
  std::size_t agree = 0;
  double worst_gap = 0.0, worst_residual = 0.0;
  for (const auto seed : seed_range(20)) {
    auto src = linops::SeededSource(seed).child(0);
    const auto s = theory::random_valid_instance(src, {4, 6, 5, 6}, true);
    constexpr std::size_t n = 50;
    if (n < inner::invertibility_threshold(s.inner, s.eta)) continue;
    const auto c = theory::compare_trainers(s, n);
    if (c.equivalent()) ++agree;
    worst_gap = std::max(worst_gap, std::abs(c.loss_ift - c.loss_unrolled) / (1.0 + c.loss_unrolled));
    worst_residual = std::max({worst_residual, c.residual_ift, c.residual_unrolled});
  }
  return {agree == 20, std::to_string(agree) + "/20 equivalent; worst relative loss gap " + sci(worst_gap) +
                           ", worst residual " + sci(worst_residual)};
}

// ------------------------------------------------------------- criterion 7

Vector literal_iterate(const inner::AffineInnerProblem& p, const Vector& theta, const Vector& z0, double eta,
                       std::size_t n) {
  Vector z = z0;
  for (std::size_t k = 0; k < n; ++k) z -= eta * (p.k_in.transpose() * (p.b * z + p.u * theta + p.c));
  return z;
}

Vector heavy_ball(const Matrix& k, const Vector& c, Vector z, double eta, double m, std::size_t n) {
  Vector prev = z;
  for (std::size_t i = 0; i < n; ++i) {
    const double step = i == 0 ? eta / (1.0 + m) : eta;
    const Vector next = z - step * (k.transpose() * (k * z + c)) + m * (z - prev);
    prev = z;
    z = next;
  }
  return z;
}

Verdict oracle_equivalences() {
  linops::SeededSource src(77);
  double closed_form = 0.0, poly = 0.0, fd = 0.0, mp = 0.0;

  for (int i = 0; i < 50; ++i) {
    const auto s = theory::random_valid_instance(src, theory::random_dims(src, 12));
    const std::size_t n = draw_count(src, 0, 50);
    const Vector theta = linops::gaussian_vector(src, s.inner.d_theta());
    const auto proc = inner::closed_form_state(s.inner, s.eta, s.z0, n);
    closed_form = std::max(closed_form, rel_err(inner::apply(proc, theta), literal_iterate(s.inner, theta, s.z0, s.eta, n)));
  }

  for (int i = 0; i < 30; ++i) {
    const Matrix k = i2o::testing::random_matrix(src, 8);
    const Vector c = linops::gaussian_vector(src, static_cast<std::size_t>(k.rows()));
    const Vector z0 = linops::gaussian_vector(src, static_cast<std::size_t>(k.cols()));
    const double l = std::max(linops::operator_norm(k) * linops::operator_norm(k), 1e-12);
    const double eta = 1.0 / l, m = 0.6;
    const std::size_t n = draw_count(src, 0, 60);
    const auto gd = respoly::quadratic_iterate(k, c, z0, respoly::residual_poly(respoly::PlainGd{eta}, n));
    const auto hb = respoly::quadratic_iterate(k, c, z0, respoly::residual_poly(respoly::Momentum{eta, m}, n));
    poly = std::max({poly, rel_err(gd, heavy_ball(k, c, z0, eta, 0.0, n)), rel_err(hb, heavy_ball(k, c, z0, eta, m, n))});
  }

  for (int i = 0; i < 20; ++i) {
    const auto s = theory::random_valid_instance(src, theory::random_dims(src, 8));
    const std::size_t n = draw_count(src, 1, 30);
    const Vector theta = linops::gaussian_vector(src, s.inner.d_theta());
    const Vector g = outer::unrolled_gradient(s, n, theta);
    Vector num(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      Vector a = theta, b = theta;
      a(j) += 1e-5;
      b(j) -= 1e-5;
      num(j) = (outer::loss_at(s, a, n) - outer::loss_at(s, b, n)) / 2e-5;
    }
    fd = std::max(fd, rel_err(g, num));
  }

  for (int i = 0; i < 100; ++i) {
    const Matrix a = i2o::testing::random_matrix(src, 30);
    const Matrix p = linops::pinv(a);
    const Matrix proj = linops::proj_range(a);
    const auto scaled = [](const Matrix& e, const Matrix& ref) { return e.norm() / (1.0 + ref.norm()); };
    mp = std::max({mp, scaled(a * p * a - a, a), scaled(p * a * p - p, p),
                   scaled((a * p).transpose() - a * p, a * p), scaled((p * a).transpose() - p * a, p * a),
                   scaled(proj * proj - proj, proj)});
  }

  return {closed_form <= 1e-9 && poly <= 1e-9 && fd <= 1e-6 && mp <= 1e-9,
          "closed form " + sci(closed_form) + ", residual polynomials " + sci(poly) + ", finite differences " +
              sci(fd) + ", Moore-Penrose/projector " + sci(mp)};
}

// ------------------------------------------------------------- criterion 8

Verdict projection_expectation() {
  constexpr std::size_t p = 10;
  double worst = 0.0;
  std::ostringstream detail;
  for (const std::size_t d : {2u, 5u, 8u}) {
    linops::SeededSource src(900 + d);
    Vector v = linops::gaussian_vector(src, p);
    v.normalize();
    double sum = 0.0;
    for (int k = 0; k < 2000; ++k) sum += (linops::proj_range(linops::gaussian_matrix(src, p, d)) * v).squaredNorm();
    const double err = std::abs(sum / 2000.0 - static_cast<double>(d) / p);
    worst = std::max(worst, err);
    detail << "d=" << d << " mean " << sci(sum / 2000.0) << "; ";
  }
  detail << "worst deviation " << sci(worst);
  return {worst <= 0.02, detail.str()};
}

// ------------------------------------------------------------- criterion 9

Verdict momentum_threshold() {
  std::ostringstream detail;
  bool ok = true;
  for (const double m : {0.1, 0.5, 0.9}) {
    // Heavy-ball parameters tuned to the spectrum [mu, 1] for this momentum.
    const double q = (1.0 - std::sqrt(m)) / (1.0 + std::sqrt(m));
    const double mu = q * q;
    const double eta = 4.0 / ((1.0 + q) * (1.0 + q));
    const std::size_t n0 = respoly::momentum_n0(m);
    const respoly::ResidualPolynomial poly(respoly::Momentum{eta, m}, 500);
    double worst = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double lambda = mu + (1.0 - mu) * i / 1000.0;
      const auto traj = poly.trajectory(lambda);
      for (std::size_t n = n0 + 1; n <= 500; ++n) worst = std::max(worst, std::abs(traj[n]));
    }
    ok = ok && worst < 1.0;
    detail << "m=" << m << " (n0=" << n0 << ") max|P_N| " << sci(worst) << "; ";
  }
  return {ok, detail.str()};
}

// ------------------------------------------------------------ criterion 10

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "i2o_acceptance_determinism";
  std::filesystem::remove_all(dir);
  const std::vector<std::vector<std::string>> configs{
      {"sweep", "--generator", "lowrank", "--num-seeds", "20", "--n", "20", "--max-delta", "200", "--grid", "full"},
      {"avgcase", "--num-seeds", "200"}};
  std::size_t identical = 0;
  std::string detail;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::string bytes[2];
    for (int run = 0; run < 2; ++run) {
      auto args = configs[i];
      const auto path = dir / (configs[i][0] + std::to_string(run) + ".csv");
      args.insert(args.end(), {"--csv", path.string()});
      std::ostringstream out, err;
      if (cli::run(args, out, err) != cli::kExitOk) return {false, configs[i][0] + " failed: " + err.str()};
      bytes[run] = read_bytes(path);
    }
    const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
    if (same) ++identical;
    detail += configs[i][0] + (same ? " identical (" : " differs (") + std::to_string(bytes[0].size()) + " bytes); ";
  }
  std::filesystem::remove_all(dir);
  return {identical == configs.size(), detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"1 surjective U: D(N, dN) minimal at dN = 0", 5.0, surjective_u_minimum},
      {"2 loss change respects the lower bound", 30.0, theorem_one_bound},
      {"3 average-case trend in d_theta and N", 60.0, average_case_trend},
      {"4 average-case right-hand side", 120.0, average_case_rhs},
      {"5 rank-deficient bound vanishes below full d_theta", 30.0, rank_deficient_scan},
      {"6 IFT and unrolled training agree", 60.0, ift_matches_unrolled},
      {"7 oracle equivalences", 60.0, oracle_equivalences},
      {"8 projection expectation d / p", 10.0, projection_expectation},
      {"9 momentum residual below 1 past n0", 10.0, momentum_threshold},
      {"10 byte-identical reruns", 0.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_seconds == 0.0 || seconds < c.budget_seconds;
    const bool pass = v.pass && in_time;
    if (!pass) ++failures;
    std::cout << (pass ? "PASS " : "FAIL ") << "criterion " << c.name << " [" << std::fixed << std::setprecision(2)
              << seconds << " s" << (in_time ? "" : ", over budget") << "] " << v.detail << std::endl;
    std::cout.unsetf(std::ios::floatfield);
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
