#pragma once

// CSV schemas written by the command-line tool.
//
//   sweep-style reports:   seed,n,delta_n,loss_n,loss_n_dn,d_gap,lower_bound
//   average-case scans:    seed,d_theta,n,lower_bound,rhs
//   trainer comparisons:   seed,n,loss_ift,loss_unrolled,loss_closed_form,
//                          residual_ift,residual_unrolled,steps_ift,steps_unrolled
//
// Reals carry 17 significant digits, so parsing a written file gives back
// the exact doubles. delta_n = "inf" marks the exact fixed point; an empty
// rhs means the average-case hypotheses did not hold.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "i2o/theory.hpp"

namespace i2o::cli {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kI2OHeader = "seed,n,delta_n,loss_n,loss_n_dn,d_gap,lower_bound";
inline constexpr std::string_view kAvgCaseHeader = "seed,d_theta,n,lower_bound,rhs";
inline constexpr std::string_view kComparisonHeader =
    "seed,n,loss_ift,loss_unrolled,loss_closed_form,residual_ift,residual_unrolled,steps_ift,steps_unrolled";

struct ComparisonRow {
  std::uint64_t seed = 0;
  theory::TrainerComparison comparison;
};

void write_i2o_csv(std::ostream& out, const std::vector<theory::I2ORow>& rows);
void write_avgcase_csv(std::ostream& out, const std::vector<theory::AvgCaseSample>& samples);
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

/// Throw CsvError naming the offending line for a wrong header, a wrong
/// field count or an unparsable field.
std::vector<theory::I2ORow> read_i2o_csv(std::istream& in);
std::vector<theory::AvgCaseSample> read_avgcase_csv(std::istream& in);

/// First line of a file, without the line terminator.
std::string read_header(const std::string& path);

/// Writes the text to path, creating parent directories.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace i2o::cli
