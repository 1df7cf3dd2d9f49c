#include "i2o/fixture.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace i2o {
namespace {

// Tokenizer that remembers line numbers for error messages.
class TokenStream {
 public:
  explicit TokenStream(std::istream& in) : in_(in) {}

  bool next(std::string& token) {
    while (true) {
      if (line_stream_ >> token) return true;
      std::string line;
      if (!std::getline(in_, line)) return false;
      ++line_no_;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line_stream_.clear();
      line_stream_.str(line);
    }
  }

  std::string expect(const char* what) {
    std::string token;
    if (!next(token)) fail(std::string("unexpected end of input, expected ") + what);
    return token;
  }

  double expect_double(const char* what) {
    const std::string token = expect(what);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      fail("bad number '" + token + "' for " + what);
    }
    return value;
  }

  Eigen::Index expect_dim(const char* what) {
    const std::string token = expect(what);
    long long value = -1;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || value < 1) {
      fail("bad dimension '" + token + "' for " + what);
    }
    return static_cast<Eigen::Index>(value);
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw FixtureError("fixture line " + std::to_string(line_no_) + ": " + message);
  }

 private:
  std::istream& in_;
  std::istringstream line_stream_;
  std::size_t line_no_ = 0;
};

void write_row(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j > 0) out << ' ';
    out << format_double(data[j]);
  }
  out << '\n';
}

}  // namespace

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

void Fixture::set(std::string name, Value value) {
  for (auto& [key, existing] : entries_) {
    if (key == name) {
      existing = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(name), std::move(value));
}

bool Fixture::contains(const std::string& name) const {
  for (const auto& entry : entries_) {
    if (entry.first == name) return true;
  }
  return false;
}

const Fixture::Value& Fixture::find(const std::string& name) const {
  for (const auto& [key, value] : entries_) {
    if (key == name) return value;
  }
  throw FixtureError("fixture has no entry '" + name + "'");
}

const Matrix& Fixture::matrix(const std::string& name) const {
  const auto* m = std::get_if<Matrix>(&find(name));
  if (m == nullptr) throw FixtureError("fixture entry '" + name + "' is not a matrix");
  return *m;
}

const Vector& Fixture::vector(const std::string& name) const {
  const auto* v = std::get_if<Vector>(&find(name));
  if (v == nullptr) throw FixtureError("fixture entry '" + name + "' is not a vector");
  return *v;
}

double Fixture::scalar(const std::string& name) const {
  const auto* s = std::get_if<double>(&find(name));
  if (s == nullptr) throw FixtureError("fixture entry '" + name + "' is not a scalar");
  return *s;
}

const std::string& Fixture::text(const std::string& name) const {
  const auto* s = std::get_if<std::string>(&find(name));
  if (s == nullptr) throw FixtureError("fixture entry '" + name + "' is not text");
  return *s;
}

Fixture read_fixture(std::istream& in) {
  Fixture fixture;
  TokenStream tokens(in);
  std::string kind;
  while (tokens.next(kind)) {
    std::string name = tokens.expect("block name");
    if (fixture.contains(name)) tokens.fail("duplicate entry '" + name + "'");
    if (kind == "matrix") {
      const Eigen::Index rows = tokens.expect_dim("rows");
      const Eigen::Index cols = tokens.expect_dim("cols");
      Matrix m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = tokens.expect_double("matrix entry");
      }
      fixture.set(std::move(name), std::move(m));
    } else if (kind == "vector") {
      const Eigen::Index n = tokens.expect_dim("length");
      Vector v(n);
      for (Eigen::Index i = 0; i < n; ++i) v(i) = tokens.expect_double("vector entry");
      fixture.set(std::move(name), std::move(v));
    } else if (kind == "scalar") {
      fixture.set(std::move(name), tokens.expect_double("scalar value"));
    } else if (kind == "text") {
      fixture.set(std::move(name), tokens.expect("text value"));
    } else {
      tokens.fail("unknown block kind '" + kind + "'");
    }
  }
  return fixture;
}

Fixture read_fixture_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FixtureError("cannot open fixture '" + path + "'");
  try {
    return read_fixture(in);
  } catch (const FixtureError& e) {
    throw FixtureError(path + ": " + e.what());
  }
}

void write_fixture(std::ostream& out, const Fixture& fixture) {
  for (const auto& [name, value] : fixture.entries()) {
    if (const auto* m = std::get_if<Matrix>(&value)) {
      out << "matrix " << name << ' ' << m->rows() << ' ' << m->cols() << '\n';
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = *m;
      for (Eigen::Index i = 0; i < rm.rows(); ++i) write_row(out, rm.row(i).data(), rm.cols());
    } else if (const auto* v = std::get_if<Vector>(&value)) {
      out << "vector " << name << ' ' << v->size() << '\n';
      write_row(out, v->data(), v->size());
    } else if (const auto* s = std::get_if<double>(&value)) {
      out << "scalar " << name << ' ' << format_double(*s) << '\n';
    } else {
      out << "text " << name << ' ' << std::get<std::string>(value) << '\n';
    }
  }
}

void write_fixture_file(const std::string& path, const Fixture& fixture) {
  std::ofstream out(path);
  if (!out) throw FixtureError("cannot write fixture '" + path + "'");
  write_fixture(out, fixture);
}

}  // namespace i2o
