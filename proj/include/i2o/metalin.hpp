#pragma once

// Linear iMAML as a stacked affine bilevel problem. Task i adapts its own
// copy z_i of the model by minimizing
//   F_i(z_i, theta) = 1/2 ||X_i z_i - y_i||^2 + lambda/2 ||z_i - theta||^2,
// whose gradient X_i^T (X_i z_i - y_i) + lambda (z_i - theta) is the inner map.
// The outer loss sums the validation losses 1/2 ||X_i^val z_i - y_i^val||^2.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "i2o/fixture.hpp"
#include "i2o/inner.hpp"
#include "i2o/outer.hpp"
#include "i2o/theory.hpp"

namespace i2o::metalin {

struct LinearTask {
  Matrix x_train;  // m_tr x d
  Vector y_train;
  Matrix x_val;  // m_val x d
  Vector y_val;

  std::size_t dim() const { return static_cast<std::size_t>(x_train.cols()); }
};

struct MetaConfig {
  double lambda = 1.0;
  std::vector<LinearTask> tasks;

  std::size_t dim() const { return tasks.empty() ? 0 : tasks.front().dim(); }
};

/// Throws std::invalid_argument for an empty task list, lambda <= 0 or
/// inconsistent shapes, std::domain_error for non-finite entries.
void validate_config(const MetaConfig& cfg);

/// K_in = I, B = blockdiag(X_i^T X_i + lambda I), U = stacked (-lambda I),
/// c = stacked (-X_i^T y_i). Checked against the inner assumptions.
inner::AffineInnerProblem build_inner(const MetaConfig& cfg);

/// K_out = blockdiag(X_i^val), omega = stacked y_i^val.
outer::QuadraticOuterLoss build_outer(const MetaConfig& cfg);

/// Inner and outer problems with z0 = 0 and eta defaulting to
/// inner::default_step_size of the stacked problem.
outer::BilevelSetup build_setup(const MetaConfig& cfg, std::optional<double> eta = std::nullopt);

/// Closed-form meta-training at n inner steps followed by theory::sweep.
theory::I2OReport meta_sweep(const MetaConfig& cfg, std::optional<double> eta, std::size_t n,
                             const std::vector<std::int64_t>& delta_grid, std::uint64_t seed = 0);

struct SyntheticTasks {
  std::size_t n_tasks = 4;
  std::size_t dim = 3;
  std::size_t m_train = 5;
  std::size_t m_val = 5;
  /// Task weights are w + spread * g_i around a shared Gaussian w.
  double spread = 1.0;
  double noise = 0.1;
  double lambda = 1.0;
};

/// Gaussian designs with targets X w_i + noise.
MetaConfig synthetic_config(linops::SeededSource& src, const SyntheticTasks& spec);

/// Reads x_train, y_train, x_val, y_val from a fixture.
LinearTask task_from_fixture(const Fixture& f);
Fixture to_fixture(const LinearTask& task);

/// Manifest lines: "lambda <value>" once, then "task <fixture path>" per
/// task; relative paths resolve against the manifest's directory. '#'
/// starts a comment.
MetaConfig load_manifest(const std::string& path);

}  // namespace i2o::metalin
