#pragma once

// Seeded random bilevel instances for the experiments and property suites.

#include <cstddef>

#include "i2o/linops.hpp"
#include "i2o/outer.hpp"

namespace i2o::theory {

/// An instance whose inner map is the z-gradient of
/// F(z, theta) = 1/2 ||K z + U theta + c||^2, with U supplied later.
/// K may be rank deficient; attach_u reduces it to surjective form.
struct QuadraticTemplate {
  Matrix k;  // m x d_z
  Vector c;  // m
  outer::QuadraticOuterLoss outer;
  Vector z0;

  std::size_t rows() const { return static_cast<std::size_t>(k.rows()); }
};

/// Builds the setup for a given U (m x d_theta), with the default step size.
outer::BilevelSetup attach_u(const QuadraticTemplate& t, const Matrix& u);

/// Strongly convex inner and outer problems of dimension d:
/// K = I + 0.1 G (resampled until invertible), K_out = I + 0.1 (G' + G'^T) / 2
/// (resampled until positive definite), and c, omega, z0 standard normal.
QuadraticTemplate strongly_convex_template(linops::SeededSource& src, std::size_t d);

/// Non strongly convex problems of dimension d_z: K = G1 G2 of rank
/// inner_rank and K_out = G3 G4 of rank outer_rank, both d_z x d_z.
QuadraticTemplate rank_deficient_template(linops::SeededSource& src, std::size_t d_z,
                                          std::size_t inner_rank, std::size_t outer_rank);

struct GeneralDims {
  std::size_t d_x = 1;
  std::size_t d_z = 1;
  std::size_t d_theta = 1;
  std::size_t d_omega = 1;
};

/// Dimensions drawn uniformly with 1 <= d_x <= d_z <= max_dim and
/// d_theta, d_omega in [1, max_dim].
GeneralDims random_dims(linops::SeededSource& src, std::size_t max_dim);

/// A valid instance with B != K_in in general: K_in Gaussian with condition
/// number <= 10, B = K_in + 0.25 G / sqrt(d_z), both resampled until the
/// spectrum of B K_in^T has real parts >= 0.01 rho, and Gaussian U, K_out, c,
/// omega, z0. With gradient_form, B = K_in.
outer::BilevelSetup random_valid_instance(linops::SeededSource& src, const GeneralDims& dims,
                                          bool gradient_form = false);

}  // namespace i2o::theory
