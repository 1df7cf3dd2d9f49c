#include "i2o/cli/svg_plot.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "i2o/cli/csv.hpp"

namespace i2o::cli {
namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fixed(double x, int precision = 2) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::fixed, precision);
  return ec == std::errc() ? std::string(buf.data(), end) : std::string("0");
}

std::string tick_label(double x) {
  if (x == 0.0) return "0";
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 4);
  return ec == std::errc() ? std::string(buf.data(), end) : std::string("?");
}

std::string escape(std::string_view text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double symlog(double x) { return std::copysign(std::log10(1.0 + std::abs(x)), x); }

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  void pad() {
    if (hi - lo <= 1e-300) {
      const double w = std::max(1e-12, std::abs(lo) * 0.1);
      lo -= w;
      hi += w;
    } else {
      const double w = 0.05 * (hi - lo);
      lo -= w;
      hi += w;
    }
  }
};

std::vector<double> linear_ticks(const Range& r, int count) {
  std::vector<double> ticks;
  for (int i = 0; i <= count; ++i) ticks.push_back(r.lo + (r.hi - r.lo) * i / count);
  return ticks;
}

// Tick positions (untransformed) at 0 and +-10^k inside the range.
std::vector<double> symlog_ticks(const Range& r) {
  std::vector<double> ticks;
  if (r.lo <= 0.0 && r.hi >= 0.0) ticks.push_back(0.0);
  for (double p = 1.0; symlog(p) <= std::max(std::abs(r.lo), std::abs(r.hi)); p *= 10.0) {
    if (symlog(p) <= r.hi) ticks.push_back(p);
    if (-symlog(p) >= r.lo) ticks.push_back(-p);
  }
  std::sort(ticks.begin(), ticks.end());
  return ticks;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  auto tx = [&](double x) { return spec.symlog_x ? symlog(x) : x; };
  bool any = false;
  Range xr, yr;
  auto include = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    if (!any) {
      xr = {x, x};
      yr = {y, y};
      any = true;
    }
    xr.lo = std::min(xr.lo, x);
    xr.hi = std::max(xr.hi, x);
    yr.lo = std::min(yr.lo, y);
    yr.hi = std::max(yr.hi, y);
  };
  for (const auto& s : spec.series) {
    for (const auto& [x, y] : s.points) include(tx(x), y);
  }
  if (!any) throw std::invalid_argument("render_svg: no finite points to plot");
  for (const auto& s : spec.series) {
    if (s.level && std::isfinite(*s.level)) {
      yr.lo = std::min(yr.lo, *s.level);
      yr.hi = std::max(yr.hi, *s.level);
    }
  }
  xr.pad();
  yr.pad();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::ostringstream svg;
  svg << R"(<?xml version="1.0" encoding="UTF-8"?>)" << '\n'
      << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << fixed(kWidth, 0) << R"(" height=")"
      << fixed(kHeight, 0) << R"(" viewBox="0 0 )" << fixed(kWidth, 0) << ' ' << fixed(kHeight, 0)
      << R"(" font-family="sans-serif" font-size="12">)" << '\n';
  svg << R"(<rect x="0" y="0" width=")" << fixed(kWidth, 0) << R"(" height=")" << fixed(kHeight, 0)
      << R"(" fill="white"/>)" << '\n';
  svg << R"(<text x=")" << fixed(kLeft + pw / 2) << R"(" y="22" text-anchor="middle" font-size="14">)"
      << escape(spec.title) << "</text>\n";

  svg << R"(<g class="axes" stroke="black" stroke-width="1">)" << '\n'
      << R"(<line x1=")" << fixed(kLeft) << R"(" y1=")" << fixed(kTop + ph) << R"(" x2=")" << fixed(kLeft + pw)
      << R"(" y2=")" << fixed(kTop + ph) << R"("/>)" << '\n'
      << R"(<line x1=")" << fixed(kLeft) << R"(" y1=")" << fixed(kTop) << R"(" x2=")" << fixed(kLeft)
      << R"(" y2=")" << fixed(kTop + ph) << R"("/>)" << '\n'
      << "</g>\n";

  svg << R"(<g class="ticks">)" << '\n';
  const auto xticks = spec.symlog_x ? symlog_ticks(xr) : linear_ticks(xr, 5);
  for (const double t : xticks) {
    const double x = px(tx(t));
    svg << R"(<line x1=")" << fixed(x) << R"(" y1=")" << fixed(kTop + ph) << R"(" x2=")" << fixed(x)
        << R"(" y2=")" << fixed(kTop + ph + 5) << R"(" stroke="black"/>)"
        << R"(<text x=")" << fixed(x) << R"(" y=")" << fixed(kTop + ph + 18) << R"(" text-anchor="middle">)"
        << escape(tick_label(t)) << "</text>\n";
  }
  for (const double t : linear_ticks(yr, 5)) {
    const double y = py(t);
    svg << R"(<line x1=")" << fixed(kLeft - 5) << R"(" y1=")" << fixed(y) << R"(" x2=")" << fixed(kLeft)
        << R"(" y2=")" << fixed(y) << R"(" stroke="black"/>)"
        << R"(<text x=")" << fixed(kLeft - 8) << R"(" y=")" << fixed(y + 4) << R"(" text-anchor="end">)"
        << escape(tick_label(t)) << "</text>\n";
  }
  svg << "</g>\n";
  svg << R"(<text x=")" << fixed(kLeft + pw / 2) << R"(" y=")" << fixed(kHeight - 15)
      << R"(" text-anchor="middle">)" << escape(spec.x_label) << "</text>\n";
  svg << R"(<text x="18" y=")" << fixed(kTop + ph / 2) << R"(" text-anchor="middle" transform="rotate(-90 18 )"
      << fixed(kTop + ph / 2) << R"x()">)x" << escape(spec.y_label) << "</text>\n";

  if (spec.vline_x) {
    const double x = px(tx(*spec.vline_x));
    svg << R"(<line class="reference" x1=")" << fixed(x) << R"(" y1=")" << fixed(kTop) << R"(" x2=")" << fixed(x)
        << R"(" y2=")" << fixed(kTop + ph) << R"(" stroke="black" stroke-dasharray="6,4"/>)" << '\n';
  }

  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const auto& s = spec.series[i];
    const char* colour = kPalette[i % kPalette.size()];
    svg << R"(<g class="series" data-name=")" << escape(s.name) << R"(">)" << '\n';
    svg << R"(<polyline fill="none" stroke=")" << colour << R"(" stroke-width="1.5" points=")";
    bool first = true;
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(tx(x)) || !std::isfinite(y)) continue;
      svg << (first ? "" : " ") << fixed(px(tx(x))) << ',' << fixed(py(y));
      first = false;
    }
    svg << R"("/>)" << '\n';
    if (s.level && std::isfinite(*s.level)) {
      svg << R"(<line x1=")" << fixed(kLeft) << R"(" y1=")" << fixed(py(*s.level)) << R"(" x2=")"
          << fixed(kLeft + pw) << R"(" y2=")" << fixed(py(*s.level)) << R"(" stroke=")" << colour
          << R"(" stroke-dasharray="2,3"/>)" << '\n';
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    svg << R"(<line x1=")" << fixed(kLeft + pw + 15) << R"(" y1=")" << fixed(ly) << R"(" x2=")"
        << fixed(kLeft + pw + 40) << R"(" y2=")" << fixed(ly) << R"(" stroke=")" << colour
        << R"(" stroke-width="2"/>)"
        << R"(<text x=")" << fixed(kLeft + pw + 46) << R"(" y=")" << fixed(ly + 4) << R"(">)" << escape(s.name)
        << "</text>\n";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

PlotKind plot_kind_from_string(std::string_view name) {
  if (name == "sweep") return PlotKind::sweep;
  if (name == "avgcase") return PlotKind::avgcase;
  throw std::invalid_argument("unknown plot kind '" + std::string(name) + "' (expected sweep or avgcase)");
}

PlotSpec sweep_plot(const std::vector<theory::I2ORow>& rows) {
  PlotSpec spec;
  spec.title = "Loss after changing the number of inner iterations";
  spec.x_label = "delta_n (symlog)";
  spec.y_label = "loss at n + delta_n";
  spec.symlog_x = true;
  spec.vline_x = 0.0;
  std::map<std::pair<std::uint64_t, std::size_t>, Series> groups;
  for (const auto& r : rows) {
    auto& s = groups[{r.seed, r.n}];
    if (s.name.empty()) s.name = "seed " + std::to_string(r.seed) + ", n " + std::to_string(r.n);
    if (r.delta_n == theory::kDeltaToConvergence) {
      s.level = r.loss_n_dn;
    } else {
      s.points.emplace_back(static_cast<double>(r.delta_n), r.loss_n_dn);
    }
  }
  for (auto& [key, s] : groups) {
    std::sort(s.points.begin(), s.points.end());
    spec.series.push_back(std::move(s));
  }
  return spec;
}

PlotSpec avgcase_plot(const std::vector<theory::AvgCaseSample>& samples) {
  PlotSpec spec;
  spec.title = "Seed-mean magnitude of the lower bound";
  spec.x_label = "d_theta";
  spec.y_label = "mean |lower bound|";
  std::map<std::size_t, std::map<std::size_t, std::pair<double, std::size_t>>> sums;
  for (const auto& s : samples) {
    auto& [sum, count] = sums[s.n][s.d_theta];
    sum += -s.lower_bound;
    ++count;
  }
  for (const auto& [n, by_theta] : sums) {
    Series s;
    s.name = "n = " + std::to_string(n);
    for (const auto& [d_theta, acc] : by_theta) {
      s.points.emplace_back(static_cast<double>(d_theta), acc.first / static_cast<double>(acc.second));
    }
    spec.series.push_back(std::move(s));
  }
  return spec;
}

void plot_csv(const std::string& csv_path, std::optional<PlotKind> kind, const std::string& out_path) {
  const std::string header = read_header(csv_path);
  if (!kind) {
    if (header == kI2OHeader) {
      kind = PlotKind::sweep;
    } else if (header == kAvgCaseHeader) {
      kind = PlotKind::avgcase;
    } else {
      throw CsvError(csv_path + ": line 1: unrecognised header '" + header + "'");
    }
  }
  std::ifstream in(csv_path);
  if (!in) throw CsvError("cannot open '" + csv_path + "'");
  PlotSpec spec;
  try {
    if (*kind == PlotKind::sweep) {
      const auto rows = read_i2o_csv(in);
      if (rows.empty()) throw CsvError("line 2: no data rows");
      spec = sweep_plot(rows);
    } else {
      const auto samples = read_avgcase_csv(in);
      if (samples.empty()) throw CsvError("line 2: no data rows");
      spec = avgcase_plot(samples);
    }
  } catch (const CsvError& e) {
    throw CsvError(csv_path + ": " + e.what());
  }
  write_text_file(out_path, render_svg(spec));
}

}  // namespace i2o::cli
