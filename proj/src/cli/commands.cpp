#include "i2o/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "i2o/cli/csv.hpp"
#include "i2o/cli/svg_plot.hpp"
#include "i2o/instances.hpp"
#include "i2o/metalin.hpp"
#include "i2o/parallel.hpp"
#include "i2o/theory.hpp"

namespace i2o::cli {
namespace {

namespace fs = std::filesystem;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// --seed, --seeds and --num-seeds, resolved to a sorted list of distinct seeds.
struct SeedOptions {
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::size_t num_seeds = 1;

  void add_to(CLI::App& app, std::size_t default_count) {
    num_seeds = default_count;
    app.add_option("--seed", seed, "First seed of the range")->capture_default_str();
    app.add_option("--num-seeds", num_seeds, "Number of consecutive seeds starting at --seed")
        ->capture_default_str();
    app.add_option("--seeds", seeds, "Explicit seed list (overrides --seed/--num-seeds)")->delimiter(',');
  }

  std::vector<std::uint64_t> resolve() const {
    std::vector<std::uint64_t> out = seeds;
    if (out.empty()) {
      if (num_seeds == 0) throw ConfigError("--num-seeds must be positive");
      for (std::size_t i = 0; i < num_seeds; ++i) out.push_back(seed + i);
    }
    std::sort(out.begin(), out.end());
    if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw ConfigError("seeds must be distinct");
    return out;
  }
};

std::string output_path(const std::string& dir, const std::string& file, const std::string& name) {
  if (!file.empty()) return file;
  return (fs::path(dir) / name).string();
}

void require_nonempty(bool empty, const char* what) {
  if (empty) throw ConfigError(std::string(what) + " must not be empty");
}

void require_positive(std::size_t v, const char* what) {
  if (v == 0) throw ConfigError(std::string(what) + " must be positive");
}

template <class Write, class Rows>
void write_csv(const std::string& path, Write&& write, const Rows& rows) {
  std::ostringstream text;
  write(text, rows);
  write_text_file(path, text.str());
}

outer::BilevelSetup template_setup(std::uint64_t seed, const theory::QuadraticTemplate& t, std::size_t d_theta) {
  auto u_src = linops::SeededSource(seed).child(1 + d_theta);
  return theory::attach_u(t, linops::gaussian_matrix(u_src, t.rows(), d_theta));
}

// ---------------------------------------------------------------- validate

struct ValidateOptions {
  std::string fixture;
  theory::GeneralDims dims{3, 5, 4, 5};
  bool gradient_form = false;
  std::uint64_t seed = 0;
  std::string out_dir = "results";
  std::string out_file;
};

int run_validate(const ValidateOptions& o, std::ostream& out) {
  outer::BilevelSetup s;
  if (!o.fixture.empty()) {
    s = setup_from_fixture(read_fixture_file(o.fixture));
  } else {
    auto src = linops::SeededSource(o.seed).child(0);
    s = theory::random_valid_instance(src, o.dims, o.gradient_form);
    const auto path = output_path(o.out_dir, o.out_file, "instance.txt");
    std::ostringstream text;
    write_fixture(text, setup_to_fixture(s));
    write_text_file(path, text.str());
    out << "wrote " << path << '\n';
  }
  const auto d = inner::validate(s.inner);
  out << "dims: d_x " << s.inner.d_x() << ", d_z " << s.inner.d_z() << ", d_theta " << s.inner.d_theta()
      << ", d_omega " << s.outer.d_omega() << '\n'
      << "rank(k_in): " << d.rank_k_in << '\n'
      << "spectrum of B K_in^T: min real part " << format_double(d.spectrum.min_real_part)
      << ", spectral radius " << format_double(d.spectrum.spectral_radius) << '\n';
  if (!d.ok()) {
    for (const auto& v : d.violations) out << "violation: " << v << '\n';
    return kExitInvariantViolation;
  }
  out << "eta: " << format_double(s.eta) << " (default " << format_double(inner::default_step_size(s.inner))
      << ")\n"
      << "invertibility threshold: " << inner::invertibility_threshold(s.inner, s.eta) << '\n'
      << "rank(U): " << linops::numerical_rank(s.inner.u)
      << (linops::numerical_rank(s.inner.u) == s.inner.d_x() ? " (surjective)" : "") << '\n'
      << "outer loss strongly convex: " << (s.outer.strongly_convex() ? "yes" : "no") << '\n'
      << "ok\n";
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepOptions {
  std::string generator = "lowrank";
  std::string fixture;
  std::size_t d_z = 5;
  std::size_t d_theta = 4;
  std::size_t inner_rank = 3;
  std::size_t outer_rank = 3;
  std::size_t d_x = 3;
  std::size_t d_omega = 5;
  std::size_t n = 20;
  std::int64_t max_delta = 200;
  std::string grid = "full";
  std::vector<std::int64_t> delta_grid;
  std::string trainer = "closed_form";
  std::optional<double> eta;
  SeedOptions seeds;
  std::string out_dir = "results";
  std::string csv;
};

outer::BilevelSetup sweep_instance(const SweepOptions& o, std::uint64_t seed) {
  if (!o.fixture.empty()) return setup_from_fixture(read_fixture_file(o.fixture));
  auto src = linops::SeededSource(seed).child(0);
  if (o.generator == "lowrank") {
    return template_setup(seed, theory::rank_deficient_template(src, o.d_z, o.inner_rank, o.outer_rank),
                          o.d_theta);
  }
  if (o.generator == "strongly-convex") {
    return template_setup(seed, theory::strongly_convex_template(src, o.d_z), o.d_theta);
  }
  if (o.generator == "general") {
    return theory::random_valid_instance(src, {o.d_x, o.d_z, o.d_theta, o.d_omega});
  }
  throw ConfigError("unknown generator '" + o.generator + "' (expected lowrank, strongly-convex or general)");
}

std::vector<std::int64_t> sweep_grid(const SweepOptions& o) {
  if (!o.delta_grid.empty()) return o.delta_grid;
  if (o.grid == "full") return theory::full_delta_grid(o.n, o.max_delta);
  if (o.grid == "geometric") return theory::default_delta_grid(o.n, o.max_delta);
  throw ConfigError("unknown grid '" + o.grid + "' (expected full or geometric)");
}

void summarize_rows(const std::vector<theory::I2ORow>& rows, std::ostream& out) {
  std::map<std::uint64_t, const theory::I2ORow*> best;
  for (const auto& r : rows) {
    auto& b = best[r.seed];
    if (!b || r.d_gap < b->d_gap) b = &r;
  }
  for (const auto& [seed, r] : best) {
    out << "seed " << seed << ": lower bound " << format_double(r->lower_bound) << ", min d_gap "
        << format_double(r->d_gap) << " at delta_n "
        << (r->delta_n == theory::kDeltaToConvergence ? std::string("inf") : std::to_string(r->delta_n)) << '\n';
  }
}

int run_sweep(const SweepOptions& o, std::ostream& out) {
  require_positive(o.n, "--n");
  const auto trainer = outer::trainer_from_string(o.trainer);
  const auto grid = sweep_grid(o);
  const auto seeds = o.seeds.resolve();
  std::vector<theory::I2OReport> reports(seeds.size());
  parallel_for(seeds.size(), worker_count(), [&](std::size_t i) {
    auto s = sweep_instance(o, seeds[i]);
    if (o.eta) s.eta = *o.eta;
    reports[i] = theory::sweep(s, o.n, grid, trainer, seeds[i], false);
  });
  std::vector<theory::I2ORow> rows;
  for (const auto& r : reports) rows.insert(rows.end(), r.rows.begin(), r.rows.end());
  const auto path = output_path(o.out_dir, o.csv, "sweep.csv");
  write_csv(path, write_i2o_csv, rows);
  out << "wrote " << path << " (" << rows.size() << " rows)\n";
  summarize_rows(rows, out);
  for (const auto& r : reports) theory::check_report(r);
  return kExitOk;
}

// --------------------------------------------------------- lowerbound-scan

struct ScanOptions {
  std::size_t max_dim = 12;
  std::size_t n = 10;
  std::int64_t delta_factor = 5;
  std::string trainer = "closed_form";
  SeedOptions seeds;
  std::string out_dir = "results";
  std::string csv;
};

int run_lowerbound_scan(const ScanOptions& o, std::ostream& out) {
  require_positive(o.n, "--n");
  require_positive(o.max_dim, "--max-dim");
  if (o.delta_factor < 0) throw ConfigError("--delta-factor must be nonnegative");
  const auto trainer = outer::trainer_from_string(o.trainer);
  const auto grid = theory::full_delta_grid(o.n, o.delta_factor * static_cast<std::int64_t>(o.n));
  const auto seeds = o.seeds.resolve();
  std::vector<theory::I2OReport> reports(seeds.size());
  parallel_for(seeds.size(), worker_count(), [&](std::size_t i) {
    const linops::SeededSource root(seeds[i]);
    auto dims_src = root.child(0);
    auto src = root.child(1);
    const auto s = theory::random_valid_instance(src, theory::random_dims(dims_src, o.max_dim));
    reports[i] = theory::sweep(s, o.n, grid, trainer, seeds[i], false);
  });
  std::vector<theory::I2ORow> rows;
  std::size_t violations = 0;
  for (const auto& r : reports) {
    for (const auto& row : r.rows) violations += theory::row_respects_bound(row) ? 0 : 1;
    rows.insert(rows.end(), r.rows.begin(), r.rows.end());
  }
  const auto path = output_path(o.out_dir, o.csv, "lowerbound_scan.csv");
  write_csv(path, write_i2o_csv, rows);
  out << "wrote " << path << " (" << rows.size() << " rows, " << seeds.size() << " instances)\n"
      << "rows violating the lower bound: " << violations << '\n';
  for (const auto& r : reports) theory::check_report(r);
  return kExitOk;
}

// ------------------------------------------------- avgcase, nonconvex-scan

struct AvgCaseOptions {
  std::size_t d_z = 20;
  std::vector<std::size_t> d_theta_grid{2, 5, 10, 15, 20};
  std::vector<std::size_t> n_grid{10, 50, 100, 200};
  SeedOptions seeds;
  std::string out_dir = "results";
  std::string csv;
};

struct NonconvexOptions {
  theory::RankDeficientDims dims;
  std::vector<std::size_t> d_theta_grid{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::size_t> n_grid{10, 50, 100, 200};
  SeedOptions seeds;
  std::string out_dir = "results";
  std::string csv;
};

void print_cells(const theory::AvgCaseReport& report, std::ostream& out) {
  out << "d_theta      n  mean |bound|             std error                mean rhs\n";
  for (const auto& c : report.cells) {
    out << std::setw(7) << c.d_theta << std::setw(7) << c.n << "  " << std::left << std::setw(25)
        << format_double(c.mean_magnitude) << std::setw(25) << format_double(c.std_error)
        << (c.mean_rhs ? format_double(*c.mean_rhs) : std::string("-")) << std::right
        << (c.respects_rhs ? "" : "  VIOLATED") << '\n';
  }
}

int run_avgcase(const AvgCaseOptions& o, std::ostream& out) {
  require_positive(o.d_z, "--d-z");
  require_nonempty(o.d_theta_grid.empty(), "--d-theta-grid");
  require_nonempty(o.n_grid.empty(), "--n-grid");
  const auto report =
      theory::monte_carlo_avg_case(o.d_z, o.d_theta_grid, o.n_grid, o.seeds.resolve(), worker_count());
  const auto path = output_path(o.out_dir, o.csv, "avgcase.csv");
  write_csv(path, write_avgcase_csv, report.samples);
  out << "wrote " << path << " (" << report.samples.size() << " rows)\n";
  print_cells(report, out);
  const bool ok = std::all_of(report.cells.begin(), report.cells.end(), [](const auto& c) { return c.respects_rhs; });
  if (!ok) throw theory::InvariantViolation("a cell's mean bound falls below the average-case right-hand side");
  return kExitOk;
}

int run_nonconvex(const NonconvexOptions& o, std::ostream& out) {
  require_nonempty(o.d_theta_grid.empty(), "--d-theta-grid");
  require_nonempty(o.n_grid.empty(), "--n-grid");
  const auto report =
      theory::non_strongly_convex_scan(o.dims, o.d_theta_grid, o.seeds.resolve(), o.n_grid, worker_count());
  const auto path = output_path(o.out_dir, o.csv, "nonconvex.csv");
  write_csv(path, write_avgcase_csv, report.samples);
  out << "wrote " << path << " (" << report.samples.size() << " rows)\n";
  print_cells(report, out);
  std::map<std::size_t, std::size_t> zero_seeds;
  std::map<std::pair<std::uint64_t, std::size_t>, bool> all_zero;
  for (const auto& s : report.samples) {
    auto [it, fresh] = all_zero.try_emplace({s.seed, s.d_theta}, true);
    it->second = it->second && -s.lower_bound <= 1e-9;
  }
  for (const auto& [key, zero] : all_zero) zero_seeds[key.second] += zero ? 1 : 0;
  for (const auto& [d_theta, count] : zero_seeds) {
    out << "d_theta " << d_theta << ": bound below 1e-9 for " << count << " of " << report.seeds.size()
        << " seeds\n";
  }
  return kExitOk;
}

// ----------------------------------------------------------- ift-vs-unroll

struct CompareOptions {
  theory::GeneralDims dims{4, 6, 5, 6};
  std::size_t n = 50;
  std::size_t outer_steps = 1'000'000;
  SeedOptions seeds;
  std::string out_dir = "results";
  std::string csv;
};

int run_compare(const CompareOptions& o, std::ostream& out) {
  require_positive(o.n, "--n");
  const auto seeds = o.seeds.resolve();
  std::vector<ComparisonRow> rows(seeds.size());
  parallel_for(seeds.size(), worker_count(), [&](std::size_t i) {
    auto src = linops::SeededSource(seeds[i]).child(0);
    const auto s = theory::random_valid_instance(src, o.dims, true);
    rows[i] = {seeds[i], theory::compare_trainers(s, o.n, o.outer_steps)};
  });
  const auto path = output_path(o.out_dir, o.csv, "ift_vs_unroll.csv");
  write_csv(path, write_comparison_csv, rows);
  out << "wrote " << path << " (" << rows.size() << " rows)\n";
  std::size_t failures = 0;
  for (const auto& [seed, c] : rows) {
    if (!c.equivalent()) {
      ++failures;
      out << "seed " << seed << ": losses " << format_double(c.loss_ift) << " (ift) vs "
          << format_double(c.loss_unrolled) << " (unrolled), residuals " << format_double(c.residual_ift)
          << " and " << format_double(c.residual_unrolled) << '\n';
    }
  }
  out << "instances where the two trainers disagree: " << failures << '\n';
  if (failures > 0) throw theory::InvariantViolation("IFT and unrolled solutions disagree");
  return kExitOk;
}

// -------------------------------------------------------------- imaml-demo

struct ImamlOptions {
  std::string manifest;
  metalin::SyntheticTasks tasks;
  std::optional<double> lambda;
  std::optional<double> eta;
  std::size_t n = 10;
  std::int64_t max_delta = 100;
  std::uint64_t seed = 0;
  std::string out_dir = "results";
  std::string csv;
};

int run_imaml(const ImamlOptions& o, std::ostream& out) {
  require_positive(o.n, "--n");
  metalin::MetaConfig cfg;
  if (!o.manifest.empty()) {
    cfg = metalin::load_manifest(o.manifest);
  } else {
    auto src = linops::SeededSource(o.seed).child(0);
    cfg = metalin::synthetic_config(src, o.tasks);
  }
  if (o.lambda) cfg.lambda = *o.lambda;
  const auto report = metalin::meta_sweep(cfg, o.eta, o.n, theory::default_delta_grid(o.n, o.max_delta), o.seed);
  const auto path = output_path(o.out_dir, o.csv, "imaml.csv");
  write_csv(path, write_i2o_csv, report.rows);
  out << "wrote " << path << " (" << report.rows.size() << " rows)\n"
      << cfg.tasks.size() << " tasks of dimension " << cfg.dim() << ", lambda " << format_double(cfg.lambda)
      << ", eta " << format_double(report.eta) << '\n';
  summarize_rows(report.rows, out);
  return kExitOk;
}

// -------------------------------------------------------------------- plot

struct PlotOptions {
  std::string csv;
  std::string kind;
  std::string svg;
};

int run_plot(const PlotOptions& o, std::ostream& out) {
  std::optional<PlotKind> kind;
  if (!o.kind.empty()) kind = plot_kind_from_string(o.kind);
  const std::string svg = o.svg.empty() ? fs::path(o.csv).replace_extension(".svg").string() : o.svg;
  plot_csv(o.csv, kind, svg);
  out << "wrote " << svg << '\n';
  return kExitOk;
}

void add_output(CLI::App& app, std::string& dir, std::string& file, const char* file_flag) {
  app.add_option("--out", dir, "Output directory")->capture_default_str();
  app.add_option(file_flag, file, "Output file (overrides --out)");
}

}  // namespace

std::size_t worker_count() {
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("I2O_THREADS"); env != nullptr && *env != '\0') {
    const std::string_view text(env);
    std::size_t cap = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), cap);
    if (ec != std::errc() || end != text.data() + text.size() || cap == 0) {
      throw std::invalid_argument("I2O_THREADS must be a positive integer, got '" + std::string(text) + "'");
    }
    workers = std::min(workers, cap);
  }
  return workers;
}

Fixture setup_to_fixture(const outer::BilevelSetup& s) {
  Fixture f = inner::to_fixture(s.inner);
  f.set("k_out", s.outer.k_out);
  f.set("omega", s.outer.omega);
  f.set("eta", s.eta);
  f.set("z0", s.z0);
  return f;
}

outer::BilevelSetup setup_from_fixture(const Fixture& f) {
  outer::BilevelSetup s;
  s.inner = inner::problem_from_fixture(f);
  s.outer = outer::loss_from_fixture(f);
  s.z0 = f.contains("z0") ? f.vector("z0") : Vector::Zero(s.inner.k_in.cols());
  if (f.contains("eta")) {
    s.eta = f.scalar("eta");
  } else if (inner::validate(s.inner).ok()) {
    s.eta = inner::default_step_size(s.inner);
  }
  return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inner-iterations overfitting experiments for affine implicit models", "i2o"};
  app.set_config("--config", "", "Key-value config file with one [command] section per command");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  ValidateOptions validate;
  auto* validate_cmd = app.add_subcommand("validate", "Check the inner-problem assumptions of an instance");
  validate_cmd->add_option("--fixture", validate.fixture, "Setup fixture to check (default: generate one)");
  validate_cmd->add_option("--d-x", validate.dims.d_x)->capture_default_str();
  validate_cmd->add_option("--d-z", validate.dims.d_z)->capture_default_str();
  validate_cmd->add_option("--d-theta", validate.dims.d_theta)->capture_default_str();
  validate_cmd->add_option("--d-omega", validate.dims.d_omega)->capture_default_str();
  validate_cmd->add_flag("--gradient-form", validate.gradient_form, "Generate with B = K_in");
  validate_cmd->add_option("--seed", validate.seed)->capture_default_str();
  add_output(*validate_cmd, validate.out_dir, validate.out_file, "--fixture-out");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Loss change D(n, delta_n) over a delta_n grid");
  sweep_cmd->add_option("--generator", sweep.generator, "lowrank, strongly-convex or general")->capture_default_str();
  sweep_cmd->add_option("--fixture", sweep.fixture, "Setup fixture (overrides the generator)");
  sweep_cmd->add_option("--d-z", sweep.d_z)->capture_default_str();
  sweep_cmd->add_option("--d-theta", sweep.d_theta)->capture_default_str();
  sweep_cmd->add_option("--inner-rank", sweep.inner_rank)->capture_default_str();
  sweep_cmd->add_option("--outer-rank", sweep.outer_rank)->capture_default_str();
  sweep_cmd->add_option("--d-x", sweep.d_x, "general generator only")->capture_default_str();
  sweep_cmd->add_option("--d-omega", sweep.d_omega, "general generator only")->capture_default_str();
  sweep_cmd->add_option("--n", sweep.n, "Inner iterations used for training")->capture_default_str();
  sweep_cmd->add_option("--max-delta", sweep.max_delta)->capture_default_str();
  sweep_cmd->add_option("--grid", sweep.grid, "full or geometric")->capture_default_str();
  sweep_cmd->add_option("--delta-grid", sweep.delta_grid, "Explicit delta_n list")->delimiter(',');
  sweep_cmd->add_option("--trainer", sweep.trainer, "closed_form, unrolled_gd or ift_gd")->capture_default_str();
  sweep_cmd->add_option("--eta", sweep.eta, "Inner step size (default: generator's)");
  sweep.seeds.add_to(*sweep_cmd, 1);
  add_output(*sweep_cmd, sweep.out_dir, sweep.csv, "--csv");

  ScanOptions scan;
  auto* scan_cmd = app.add_subcommand("lowerbound-scan", "Check the lower bound on random valid instances");
  scan_cmd->add_option("--max-dim", scan.max_dim)->capture_default_str();
  scan_cmd->add_option("--n", scan.n)->capture_default_str();
  scan_cmd->add_option("--delta-factor", scan.delta_factor, "delta_n runs up to factor * n")->capture_default_str();
  scan_cmd->add_option("--trainer", scan.trainer)->capture_default_str();
  scan.seeds.add_to(*scan_cmd, 50);
  add_output(*scan_cmd, scan.out_dir, scan.csv, "--csv");

  AvgCaseOptions avg;
  auto* avg_cmd = app.add_subcommand("avgcase", "Monte Carlo bound magnitudes for strongly convex problems");
  avg_cmd->add_option("--d-z", avg.d_z)->capture_default_str();
  avg_cmd->add_option("--d-theta-grid", avg.d_theta_grid)->delimiter(',')->capture_default_str();
  avg_cmd->add_option("--n-grid", avg.n_grid)->delimiter(',')->capture_default_str();
  avg.seeds.add_to(*avg_cmd, 20);
  add_output(*avg_cmd, avg.out_dir, avg.csv, "--csv");

  NonconvexOptions nonconvex;
  auto* nonconvex_cmd = app.add_subcommand("nonconvex-scan", "Bound magnitudes for rank-deficient problems");
  nonconvex_cmd->add_option("--d-z", nonconvex.dims.d_z)->capture_default_str();
  nonconvex_cmd->add_option("--inner-rank", nonconvex.dims.inner_rank)->capture_default_str();
  nonconvex_cmd->add_option("--outer-rank", nonconvex.dims.outer_rank)->capture_default_str();
  nonconvex_cmd->add_option("--d-theta-grid", nonconvex.d_theta_grid)->delimiter(',')->capture_default_str();
  nonconvex_cmd->add_option("--n-grid", nonconvex.n_grid)->delimiter(',')->capture_default_str();
  nonconvex.seeds.add_to(*nonconvex_cmd, 20);
  add_output(*nonconvex_cmd, nonconvex.out_dir, nonconvex.csv, "--csv");

  CompareOptions compare;
  auto* compare_cmd = app.add_subcommand("ift-vs-unroll", "Compare IFT and unrolled outer descent");
  compare_cmd->add_option("--d-x", compare.dims.d_x)->capture_default_str();
  compare_cmd->add_option("--d-z", compare.dims.d_z)->capture_default_str();
  compare_cmd->add_option("--d-theta", compare.dims.d_theta)->capture_default_str();
  compare_cmd->add_option("--d-omega", compare.dims.d_omega)->capture_default_str();
  compare_cmd->add_option("--n", compare.n)->capture_default_str();
  compare_cmd->add_option("--outer-steps", compare.outer_steps)->capture_default_str();
  compare.seeds.add_to(*compare_cmd, 20);
  add_output(*compare_cmd, compare.out_dir, compare.csv, "--csv");

  ImamlOptions imaml;
  auto* imaml_cmd = app.add_subcommand("imaml-demo", "Loss change for linear iMAML");
  imaml_cmd->add_option("--manifest", imaml.manifest, "Task manifest (default: synthetic tasks)");
  imaml_cmd->add_option("--tasks", imaml.tasks.n_tasks)->capture_default_str();
  imaml_cmd->add_option("--dim", imaml.tasks.dim)->capture_default_str();
  imaml_cmd->add_option("--m-train", imaml.tasks.m_train)->capture_default_str();
  imaml_cmd->add_option("--m-val", imaml.tasks.m_val)->capture_default_str();
  imaml_cmd->add_option("--spread", imaml.tasks.spread)->capture_default_str();
  imaml_cmd->add_option("--noise", imaml.tasks.noise)->capture_default_str();
  imaml_cmd->add_option("--lambda", imaml.lambda, "Regularization (overrides the manifest)");
  imaml_cmd->add_option("--eta", imaml.eta);
  imaml_cmd->add_option("--n", imaml.n)->capture_default_str();
  imaml_cmd->add_option("--max-delta", imaml.max_delta)->capture_default_str();
  imaml_cmd->add_option("--seed", imaml.seed)->capture_default_str();
  add_output(*imaml_cmd, imaml.out_dir, imaml.csv, "--csv");

  PlotOptions plot;
  auto* plot_cmd = app.add_subcommand("plot", "Render a CSV written by sweep, avgcase or nonconvex-scan as SVG");
  plot_cmd->add_option("--csv", plot.csv)->required();
  plot_cmd->add_option("--kind", plot.kind, "sweep or avgcase (default: from the header)");
  plot_cmd->add_option("--svg", plot.svg, "Output file (default: the CSV path with .svg)");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalidConfig;
  }

  const std::vector<std::pair<CLI::App*, std::function<int()>>> handlers = {
      {validate_cmd, [&] { return run_validate(validate, out); }},
      {sweep_cmd, [&] { return run_sweep(sweep, out); }},
      {scan_cmd, [&] { return run_lowerbound_scan(scan, out); }},
      {avg_cmd, [&] { return run_avgcase(avg, out); }},
      {nonconvex_cmd, [&] { return run_nonconvex(nonconvex, out); }},
      {compare_cmd, [&] { return run_compare(compare, out); }},
      {imaml_cmd, [&] { return run_imaml(imaml, out); }},
      {plot_cmd, [&] { return run_plot(plot, out); }},
  };
  try {
    for (const auto& [cmd, handler] : handlers) {
      if (cmd->parsed()) return handler();
    }
  } catch (const theory::InvariantViolation& e) {
    err << "invariant violation: " << e.what() << '\n';
    return kExitInvariantViolation;
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const std::domain_error& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const FixtureError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const CsvError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeFailure;
  }
  err << "no command given\n";
  return kExitInvalidConfig;
}

}  // namespace i2o::cli
