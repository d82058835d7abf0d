#pragma once

#include <algorithm>
#include <cmath>

#include "sparsefield/covariance.hpp"
#include "sparsefield/geometry.hpp"
#include "sparsefield/rng.hpp"

namespace sftest {

using namespace sparsefield;

inline Domain unit_square(double side = 10.0) { return Domain({0.0, 0.0}, {side, side}); }
inline Domain unit_interval() { return Domain({0.0}, {1.0}); }

inline CovarianceModel field_model(double mean = 0.0, double variance = 1.0) {
  return {mean, variance, PoweredExponential::from_phi_pow_nu(4.0, 1.9)};
}

// Exponential kernel: much better conditioned than nu = 1.9 for dense oracles.
inline CovarianceModel rough_model(double phi = 2.0) { return {0.0, 1.0, PoweredExponential{phi, 1.0}}; }

inline CovarianceModel bridge() { return {0.0, 1.0, BrownianBridge{}}; }

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  return (a - b).cwiseAbs().maxCoeff();
}

inline LocationList random_points(const Domain& d, std::size_t n, std::uint64_t seed) {
  return uniform_locations(d, n, StreamKey(seed));
}

}  // namespace sftest
