#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sparsefield/covariance.hpp"
#include "sparsefield/pcgp.hpp"
#include "sparsefield/sparse_process.hpp"

namespace sparsefield {

/// A Gaussian law N(mu 1, sigma^2 Omega) with the correlation structure
/// Omega fixed.  Implementations never form Omega^{-1} densely at scale.
class GaussianStructure {
 public:
  virtual ~GaussianStructure() = default;

  virtual std::size_t size() const = 0;
  virtual double log_det() const = 0;
  /// u^T Omega^{-1} v.
  virtual double bilinear(std::span<const double> u, std::span<const double> v) const = 0;
  virtual std::string tag() const = 0;

  double quadratic(std::span<const double> u) const { return bilinear(u, u); }
  double log_likelihood(std::span<const double> data, double mean, double variance) const;
};

/// Dense Omega through one Cholesky factorisation.  Oracle and parent GP.
class DenseStructure final : public GaussianStructure {
 public:
  DenseStructure(const Matrix& omega, std::string tag = "dense");

  std::size_t size() const override { return static_cast<std::size_t>(factor_.rows()); }
  double log_det() const override { return log_det_; }
  double bilinear(std::span<const double> u, std::span<const double> v) const override;
  std::string tag() const override { return tag_; }

 private:
  Matrix factor_;
  double log_det_ = 0.0;
  std::string tag_;
};

/// Omega^{-1} = (I - B)^T F^{-1} (I - B) from a unit-variance reference
/// factor; data live on the reference set, in reference order.
class NngpStructure final : public GaussianStructure {
 public:
  explicit NngpStructure(std::shared_ptr<const SparseFactor> unit_factor);

  std::size_t size() const override { return factor_->size(); }
  double log_det() const override { return log_det_; }
  double bilinear(std::span<const double> u, std::span<const double> v) const override;
  std::string tag() const override { return "NNGP"; }

 private:
  std::vector<double> whiten(std::span<const double> u) const;

  std::shared_ptr<const SparseFactor> factor_;
  double log_det_ = 0.0;
};

/// PCGP marginal at the targets: Omega = A Sigma_S A^T + blockdiag(Sigma_k).
/// Uses the matrix-inversion lemma on the rank-r coupling; the r x r core
/// Sigma_S^{-1} + A^T B^{-1} A is factorised once.
class PcgpStructure final : public GaussianStructure {
 public:
  /// `unit_model` must carry mean 0 and variance 1.
  PcgpStructure(const PcgpModel& unit_model, std::span<const Location> targets);

  std::size_t size() const override { return n_; }
  double log_det() const override { return log_det_; }
  double bilinear(std::span<const double> u, std::span<const double> v) const override;
  std::string tag() const override { return "PCGP"; }

  const BlockList& blocks() const { return blocks_; }

 private:
  struct Whitened {
    std::vector<Vector> per_block;  // L_k^{-1} u_k
    Vector coupling;                // sum_k G_k^T L_k^{-1} u_k
  };
  Whitened whiten(std::span<const double> u) const;

  std::size_t n_ = 0;
  std::size_t r_ = 0;
  BlockList blocks_;
  std::vector<Matrix> whitened_coeffs_;  // G_k = L_k^{-1} A_k
  Matrix core_factor_;
  double log_det_ = 0.0;
};

/// Log-likelihood of data on the reference set under the NNGP law with
/// mean `mean` and variance `variance`: every conditional mean is
/// mean + a^T (z_N - mean 1) and every conditional variance scales with
/// `variance`.  `unit_factor` is built at variance 1.
double nngp_loglik(const SparseFactor& unit_factor, std::span<const double> data, double mean,
                   double variance);

/// Exact PCGP marginal log-density of data at the targets.
double pcgp_marginal_loglik(const PcgpStructure& structure, std::span<const double> data,
                            double mean, double variance);

struct MleResult {
  double mean = 0.0;
  double variance = 0.0;
  double loglik = 0.0;
  double mean_se = 0.0;
  double variance_se = 0.0;
  std::string model;
  std::size_t n = 0;
  bool degenerate = false;
};

inline constexpr double kVarianceFloor = 1e-12;

/// Closed-form generalised least squares for (mean, variance) with the
/// correlation structure fixed.
MleResult profile_mle(const GaussianStructure& structure, std::span<const double> data);

struct SimplexOptions {
  double tolerance = 1e-8;  // simplex diameter, in units of the initial steps
  int max_iterations = 20000;
};

struct SimplexResult {
  std::vector<double> argmin;
  double value = 0.0;
  int iterations = 0;
};

/// Nelder-Mead minimiser.  Throws std::runtime_error when the simplex has
/// not shrunk below the tolerance within max_iterations.
SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                          std::span<const double> start, std::span<const double> steps,
                          const SimplexOptions& options = {});

/// Derivative-free maximiser of loglik(mean, variance) over (mean, log variance).
std::array<double, 2> optimize_crosscheck(
    const std::function<double(double mean, double variance)>& loglik, double mean0,
    double variance0, const SimplexOptions& options = {});

}  // namespace sparsefield
