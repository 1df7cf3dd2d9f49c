#pragma once

// Plain-text fixture format for matrices, vectors and scalars.
//
//   # comment lines and blank lines are ignored
//   matrix <name> <rows> <cols>
//   <rows * cols whitespace-separated entries, row-major>
//   vector <name> <length>
//   <length entries>
//   scalar <name> <value>
//   text <name> <token>
//
// Numbers are written with 17 significant digits so a write/read cycle is
// lossless. Block order is preserved.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "i2o/linops.hpp"

namespace i2o {

class FixtureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Fixture {
 public:
  using Value = std::variant<Matrix, Vector, double, std::string>;

  void set(std::string name, Value value);
  bool contains(const std::string& name) const;

  const Matrix& matrix(const std::string& name) const;
  const Vector& vector(const std::string& name) const;
  double scalar(const std::string& name) const;
  const std::string& text(const std::string& name) const;

  const std::vector<std::pair<std::string, Value>>& entries() const { return entries_; }

 private:
  const Value& find(const std::string& name) const;

  std::vector<std::pair<std::string, Value>> entries_;
};

Fixture read_fixture(std::istream& in);
Fixture read_fixture_file(const std::string& path);
void write_fixture(std::ostream& out, const Fixture& fixture);
void write_fixture_file(const std::string& path, const Fixture& fixture);

/// Shortest-roundtrip-safe decimal form with 17 significant digits.
std::string format_double(double x);

}  // namespace i2o
