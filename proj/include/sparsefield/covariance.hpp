#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <variant>

#include "sparsefield/geometry.hpp"
#include "sparsefield/rng.hpp"

namespace sparsefield {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a covariance matrix stays non-positive-definite after the
/// single jitter retry.
class SingularCovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Isotropic powered exponential correlation exp{-(d/phi)^nu}, 0 < nu <= 2.
/// nu = 2 (the Gaussian kernel) is accepted but badly conditioned on dense
/// point sets.
struct PoweredExponential {
  double phi = 1.0;
  double nu = 1.0;

  /// Builds from the (phi^nu, nu) parameterisation.
  static PoweredExponential from_phi_pow_nu(double phi_pow_nu, double nu);
};

/// Standard Brownian bridge kernel min(s,t) - s*t on [0,1].
struct BrownianBridge {};

using CovarianceFamily = std::variant<PoweredExponential, BrownianBridge>;

struct CovarianceModel {
  double mean = 0.0;
  double variance = 1.0;
  CovarianceFamily family = PoweredExponential{};

  /// Throws PreconditionError on invalid parameters.
  void validate() const;
  /// Same correlation structure with mean 0 and unit variance.
  CovarianceModel standardized() const;
};

double covariance(const CovarianceModel& model, const Location& u, const Location& v);

Matrix cov_matrix(const CovarianceModel& model, std::span<const Location> locs);
Matrix cross_cov(const CovarianceModel& model, std::span<const Location> rows,
                 std::span<const Location> cols);

/// Lower Cholesky factor.  On failure retries once with 1e-10 * variance
/// added to the diagonal, then throws SingularCovarianceError naming
/// `context`.
Matrix cholesky_lower(const Matrix& cov, double variance, const char* context);

/// Parent-GP law of Z_targets given Z_cond:
///   mean = offset + coeffs * z_cond,  covariance = C_TT - coeffs * C_NT.
struct GaussianConditional {
  Matrix coeffs;       // targets x conditioners
  Vector offset;       // mean * (1 - coeffs * 1)
  Matrix covariance;   // targets x targets
};

GaussianConditional condition(const CovarianceModel& model, std::span<const Location> targets,
                              std::span<const Location> cond_locs);

double mvn_logdensity(const Vector& mean, const Matrix& cov_factor, const Vector& x);

Vector mvn_sample(const Vector& mean, const Matrix& cov_factor, RandomStream& stream);

}  // namespace sparsefield
