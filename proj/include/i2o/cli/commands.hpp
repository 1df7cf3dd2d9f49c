#pragma once

// The i2o command-line tool. Every command takes --config <file>; the file
// holds one [command] section of "key = value" lines named after the long
// options, and flags given on the command line win over it.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "i2o/outer.hpp"

namespace i2o::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidConfig = 1;
inline constexpr int kExitInvariantViolation = 2;
inline constexpr int kExitRuntimeFailure = 3;

/// Runs the tool on args (without the program name) and returns the exit
/// status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hardware concurrency, capped by the I2O_THREADS environment variable.
/// Throws std::invalid_argument when I2O_THREADS is not a positive integer.
std::size_t worker_count();

/// A full bilevel setup as one fixture: k_in, b, u, c, k_out, omega, eta, z0.
/// Reading does not validate; a missing z0 is zero and a missing eta is the
/// default step size when the inner problem is valid.
Fixture setup_to_fixture(const outer::BilevelSetup& s);
outer::BilevelSetup setup_from_fixture(const Fixture& f);

}  // namespace i2o::cli
