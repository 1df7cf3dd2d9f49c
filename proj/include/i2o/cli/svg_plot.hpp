#pragma once

// Self-contained SVG line plots rebuilt from the CSV files alone.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "i2o/theory.hpp"

namespace i2o::cli {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  /// Drawn as a dotted horizontal line in the series colour.
  std::optional<double> level;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  /// sign(x) log10(1 + |x|) on the x axis, so negative and large positive
  /// delta_n share one axis.
  bool symlog_x = false;
  /// Dashed vertical reference line.
  std::optional<double> vline_x;
  std::vector<Series> series;
};

std::string render_svg(const PlotSpec& spec);

enum class PlotKind { sweep, avgcase };

PlotKind plot_kind_from_string(std::string_view name);

/// Loss at N + delta_n against delta_n, one series per (seed, n); the
/// delta_n = inf rows are drawn as a dotted level.
PlotSpec sweep_plot(const std::vector<theory::I2ORow>& rows);

/// Seed-mean bound magnitude against d_theta, one series per n.
PlotSpec avgcase_plot(const std::vector<theory::AvgCaseSample>& samples);

/// Reads csv_path, detects the kind from its header unless given, and
/// writes the SVG to out_path. A malformed or header-only CSV throws
/// CsvError and leaves out_path untouched.
void plot_csv(const std::string& csv_path, std::optional<PlotKind> kind, const std::string& out_path);

}  // namespace i2o::cli
