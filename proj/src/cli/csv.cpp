#include "i2o/cli/csv.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

namespace i2o::cli {
namespace {

std::string format_delta(std::int64_t d) {
  return d == theory::kDeltaToConvergence ? std::string("inf") : std::to_string(d);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string_view header) : in_(in) {
    std::string line;
    if (!next(line)) throw CsvError("line 1: missing header");
    if (line != header) {
      throw CsvError("line 1: expected header '" + std::string(header) + "', got '" + line + "'");
    }
  }

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw CsvError("line " + std::to_string(line_no_) + ": " + what);
  }

  std::vector<std::string_view> fields(const std::string& line, std::size_t count) const {
    auto f = split(line);
    if (f.size() != count) {
      fail("expected " + std::to_string(count) + " fields, got " + std::to_string(f.size()));
    }
    return f;
  }

  template <class T>
  T number(std::string_view text, const char* column) const {
    T value{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || end != text.data() + text.size()) {
      fail(std::string("invalid ") + column + " '" + std::string(text) + "'");
    }
    return value;
  }

  std::int64_t delta(std::string_view text) const {
    return text == "inf" ? theory::kDeltaToConvergence : number<std::int64_t>(text, "delta_n");
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

void write_i2o_csv(std::ostream& out, const std::vector<theory::I2ORow>& rows) {
  out << kI2OHeader << '\n';
  for (const auto& r : rows) {
    out << r.seed << ',' << r.n << ',' << format_delta(r.delta_n) << ',' << format_double(r.loss_n) << ','
        << format_double(r.loss_n_dn) << ',' << format_double(r.d_gap) << ','
        << format_double(r.lower_bound) << '\n';
  }
}

void write_avgcase_csv(std::ostream& out, const std::vector<theory::AvgCaseSample>& samples) {
  out << kAvgCaseHeader << '\n';
  for (const auto& s : samples) {
    out << s.seed << ',' << s.d_theta << ',' << s.n << ',' << format_double(s.lower_bound) << ','
        << (s.rhs ? format_double(*s.rhs) : std::string()) << '\n';
  }
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << kComparisonHeader << '\n';
  for (const auto& [seed, c] : rows) {
    out << seed << ',' << c.n << ',' << format_double(c.loss_ift) << ',' << format_double(c.loss_unrolled)
        << ',' << format_double(c.loss_closed_form) << ',' << format_double(c.residual_ift) << ','
        << format_double(c.residual_unrolled) << ',' << c.steps_ift << ',' << c.steps_unrolled << '\n';
  }
}

std::vector<theory::I2ORow> read_i2o_csv(std::istream& in) {
  LineReader reader(in, kI2OHeader);
  std::vector<theory::I2ORow> rows;
  std::string line;
  while (reader.next(line)) {
    const auto f = reader.fields(line, 7);
    rows.push_back({reader.number<std::uint64_t>(f[0], "seed"), reader.number<std::size_t>(f[1], "n"),
                    reader.delta(f[2]), reader.number<double>(f[3], "loss_n"),
                    reader.number<double>(f[4], "loss_n_dn"), reader.number<double>(f[5], "d_gap"),
                    reader.number<double>(f[6], "lower_bound")});
  }
  return rows;
}

std::vector<theory::AvgCaseSample> read_avgcase_csv(std::istream& in) {
  LineReader reader(in, kAvgCaseHeader);
  std::vector<theory::AvgCaseSample> samples;
  std::string line;
  while (reader.next(line)) {
    const auto f = reader.fields(line, 5);
    theory::AvgCaseSample s{reader.number<std::uint64_t>(f[0], "seed"),
                            reader.number<std::size_t>(f[1], "d_theta"), reader.number<std::size_t>(f[2], "n"),
                            reader.number<double>(f[3], "lower_bound"), std::nullopt};
    if (!f[4].empty()) s.rhs = reader.number<double>(f[4], "rhs");
    samples.push_back(s);
  }
  return samples;
}

std::string read_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw CsvError(path + ": line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out.flush()) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace i2o::cli
