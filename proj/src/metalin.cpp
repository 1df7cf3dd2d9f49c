#include "i2o/metalin.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace i2o::metalin {
namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

}  // namespace

void validate_config(const MetaConfig& cfg) {
  if (cfg.tasks.empty()) throw std::invalid_argument("metalin: task list is empty");
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("metalin: lambda must be positive");
  if (!std::isfinite(cfg.lambda)) throw std::domain_error("metalin: lambda must be finite");
  const std::size_t d = cfg.dim();
  if (d == 0) throw std::invalid_argument("metalin: tasks need at least one feature");
  for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
    const auto& t = cfg.tasks[i];
    const std::string where = "metalin task " + std::to_string(i);
    if (t.dim() != d || static_cast<std::size_t>(t.x_val.cols()) != d) {
      throw std::invalid_argument(where + ": feature dimension differs from " + std::to_string(d));
    }
    if (t.x_train.rows() != t.y_train.size() || t.x_val.rows() != t.y_val.size()) {
      throw std::invalid_argument(where + ": targets do not match design rows");
    }
    linops::require_finite(t.x_train, where + " x_train");
    linops::require_finite(t.y_train, where + " y_train");
    linops::require_finite(t.x_val, where + " x_val");
    linops::require_finite(t.y_val, where + " y_val");
  }
}

inner::AffineInnerProblem build_inner(const MetaConfig& cfg) {
  validate_config(cfg);
  const auto d = idx(cfg.dim());
  const auto total = d * idx(cfg.tasks.size());
  inner::AffineInnerProblem p;
  p.k_in = Matrix::Identity(total, total);
  p.b = Matrix::Zero(total, total);
  p.u = Matrix::Zero(total, d);
  p.c = Vector::Zero(total);
  for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
    const auto& t = cfg.tasks[i];
    const auto at = idx(i) * d;
    p.b.block(at, at, d, d) = t.x_train.transpose() * t.x_train + cfg.lambda * Matrix::Identity(d, d);
    p.u.block(at, 0, d, d) = -cfg.lambda * Matrix::Identity(d, d);
    p.c.segment(at, d) = -(t.x_train.transpose() * t.y_train);
  }
  inner::require_valid(p);
  return p;
}

outer::QuadraticOuterLoss build_outer(const MetaConfig& cfg) {
  validate_config(cfg);
  const auto d = idx(cfg.dim());
  Eigen::Index rows = 0;
  for (const auto& t : cfg.tasks) rows += t.x_val.rows();
  outer::QuadraticOuterLoss l;
  l.k_out = Matrix::Zero(rows, d * idx(cfg.tasks.size()));
  l.omega = Vector::Zero(rows);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
    const auto& t = cfg.tasks[i];
    l.k_out.block(row, idx(i) * d, t.x_val.rows(), d) = t.x_val;
    l.omega.segment(row, t.y_val.size()) = t.y_val;
    row += t.x_val.rows();
  }
  return l;
}

outer::BilevelSetup build_setup(const MetaConfig& cfg, std::optional<double> eta) {
  outer::BilevelSetup s;
  s.inner = build_inner(cfg);
  s.outer = build_outer(cfg);
  s.z0 = Vector::Zero(s.inner.k_in.cols());
  s.eta = eta ? *eta : inner::default_step_size(s.inner);
  if (!(s.eta > 0.0) || !std::isfinite(s.eta)) throw std::invalid_argument("metalin: eta must be positive");
  return s;
}

theory::I2OReport meta_sweep(const MetaConfig& cfg, std::optional<double> eta, std::size_t n,
                             const std::vector<std::int64_t>& delta_grid, std::uint64_t seed) {
  return theory::sweep(build_setup(cfg, eta), n, delta_grid, outer::TrainerKind::closed_form, seed);
}

MetaConfig synthetic_config(linops::SeededSource& src, const SyntheticTasks& spec) {
  if (spec.n_tasks == 0 || spec.dim == 0 || spec.m_train == 0 || spec.m_val == 0) {
    throw std::invalid_argument("synthetic_config: task count and sizes must be positive");
  }
  MetaConfig cfg;
  cfg.lambda = spec.lambda;
  const Vector shared = linops::gaussian_vector(src, spec.dim);
  for (std::size_t i = 0; i < spec.n_tasks; ++i) {
    const Vector w = shared + spec.spread * linops::gaussian_vector(src, spec.dim);
    LinearTask t;
    t.x_train = linops::gaussian_matrix(src, spec.m_train, spec.dim);
    t.y_train = t.x_train * w + spec.noise * linops::gaussian_vector(src, spec.m_train);
    t.x_val = linops::gaussian_matrix(src, spec.m_val, spec.dim);
    t.y_val = t.x_val * w + spec.noise * linops::gaussian_vector(src, spec.m_val);
    cfg.tasks.push_back(std::move(t));
  }
  validate_config(cfg);
  return cfg;
}

LinearTask task_from_fixture(const Fixture& f) {
  return {f.matrix("x_train"), f.vector("y_train"), f.matrix("x_val"), f.vector("y_val")};
}

Fixture to_fixture(const LinearTask& task) {
  Fixture f;
  f.set("x_train", task.x_train);
  f.set("y_train", task.y_train);
  f.set("x_val", task.x_val);
  f.set("y_val", task.y_val);
  return f;
}

MetaConfig load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FixtureError("cannot open manifest '" + path + "'");
  const auto base = std::filesystem::path(path).parent_path();
  MetaConfig cfg;
  bool have_lambda = false;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string key, value, extra;
    if (!(words >> key)) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (!(words >> value) || (words >> extra)) throw FixtureError(where + ": expected '<key> <value>'");
    if (key == "lambda") {
      const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), cfg.lambda);
      if (ec != std::errc() || end != value.data() + value.size()) {
        throw FixtureError(where + ": invalid lambda '" + value + "'");
      }
      have_lambda = true;
    } else if (key == "task") {
      const std::filesystem::path task_path(value);
      cfg.tasks.push_back(task_from_fixture(
          read_fixture_file((task_path.is_absolute() ? task_path : base / task_path).string())));
    } else {
      throw FixtureError(where + ": unknown key '" + key + "'");
    }
  }
  if (!have_lambda) throw FixtureError(path + ": missing lambda");
  validate_config(cfg);
  return cfg;
}

}  // namespace i2o::metalin
