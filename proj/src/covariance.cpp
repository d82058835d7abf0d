#include "sparsefield/covariance.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sparsefield {

PoweredExponential PoweredExponential::from_phi_pow_nu(double phi_pow_nu, double nu) {
  if (!(phi_pow_nu > 0.0) || !(nu > 0.0)) {
    throw PreconditionError("powered exponential: phi^nu and nu must be positive");
  }
  return {std::pow(phi_pow_nu, 1.0 / nu), nu};
}

void CovarianceModel::validate() const {
  if (!std::isfinite(mean)) throw PreconditionError("covariance model: mean must be finite");
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw PreconditionError("covariance model: variance must be positive");
  }
  if (const auto* pe = std::get_if<PoweredExponential>(&family)) {
    if (!(pe->phi > 0.0) || !std::isfinite(pe->phi)) {
      throw PreconditionError("powered exponential: phi must be positive");
    }
    if (!(pe->nu > 0.0 && pe->nu <= 2.0)) {
      throw PreconditionError("powered exponential: nu must lie in (0, 2]");
    }
  }
}

CovarianceModel CovarianceModel::standardized() const {
  CovarianceModel m = *this;
  m.mean = 0.0;
  m.variance = 1.0;
  return m;
}

double covariance(const CovarianceModel& model, const Location& u, const Location& v) {
  if (const auto* pe = std::get_if<PoweredExponential>(&model.family)) {
    const double d = distance(u, v);
    if (d == 0.0) return model.variance;
    return model.variance * std::exp(-std::pow(d / pe->phi, pe->nu));
  }
  if (u.dim != 1 || v.dim != 1 || u[0] < 0.0 || u[0] > 1.0 || v[0] < 0.0 || v[0] > 1.0) {
    throw PreconditionError("Brownian bridge kernel is defined on [0,1] only");
  }
  const double s = u[0];
  const double t = v[0];
  return model.variance * (std::min(s, t) - s * t);
}

Matrix cov_matrix(const CovarianceModel& model, std::span<const Location> locs) {
  const auto n = static_cast<Eigen::Index>(locs.size());
  Matrix c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    c(j, j) = covariance(model, locs[j], locs[j]);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      if (locs[i] == locs[j]) {
        throw PreconditionError("cov_matrix: duplicate locations at indices " + std::to_string(j) +
                                " and " + std::to_string(i));
      }
      c(i, j) = c(j, i) = covariance(model, locs[i], locs[j]);
    }
  }
  return c;
}

Matrix cross_cov(const CovarianceModel& model, std::span<const Location> rows,
                 std::span<const Location> cols) {
  Matrix c(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, j) = covariance(model, rows[i], cols[j]);
  }
  return c;
}

Matrix cholesky_lower(const Matrix& cov, double variance, const char* context) {
  if (cov.rows() == 0) return Matrix(0, 0);
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Matrix jittered = cov;
  jittered.diagonal().array() += 1e-10 * variance;
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  throw SingularCovarianceError(std::string("Cholesky failed after jitter: ") + context + " (" +
                                std::to_string(cov.rows()) + " locations)");
}

GaussianConditional condition(const CovarianceModel& model, std::span<const Location> targets,
                              std::span<const Location> cond_locs) {
  for (const auto& t : targets) {
    for (const auto& c : cond_locs) {
      if (t == c) throw PreconditionError("condition: target coincides with a conditioning location");
    }
  }
  GaussianConditional out;
  const auto nt = static_cast<Eigen::Index>(targets.size());
  Matrix c_tt = cov_matrix(model, targets);
  if (cond_locs.empty()) {
    out.coeffs = Matrix::Zero(nt, 0);
    out.offset = Vector::Constant(nt, model.mean);
    out.covariance = std::move(c_tt);
    return out;
  }
  const Matrix l = cholesky_lower(cov_matrix(model, cond_locs), model.variance, "conditioning set");
  // W = L^{-1} C_NT; coeffs = (L^{-T} W)^T; conditional covariance = C_TT - W^T W.
  const Matrix w = l.triangularView<Eigen::Lower>().solve(cross_cov(model, cond_locs, targets));
  out.coeffs = l.transpose().triangularView<Eigen::Upper>().solve(w).transpose();
  out.offset = (Vector::Ones(nt) - out.coeffs.rowwise().sum()) * model.mean;
  out.covariance = c_tt;
  out.covariance.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose(), -1.0);
  out.covariance = out.covariance.selfadjointView<Eigen::Lower>();
  return out;
}

double mvn_logdensity(const Vector& mean, const Matrix& cov_factor, const Vector& x) {
  if (mean.size() != x.size() || cov_factor.rows() != x.size() || cov_factor.cols() != x.size()) {
    throw PreconditionError("mvn_logdensity: dimension mismatch");
  }
  if (!x.allFinite() || !mean.allFinite()) throw PreconditionError("mvn_logdensity: non-finite input");
  const Vector z = cov_factor.triangularView<Eigen::Lower>().solve(x - mean);
  const double log_det = cov_factor.diagonal().array().log().sum();
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) - log_det -
         0.5 * z.squaredNorm();
}

Vector mvn_sample(const Vector& mean, const Matrix& cov_factor, RandomStream& stream) {
  Vector w(mean.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = stream.normal();
  return mean + cov_factor.triangularView<Eigen::Lower>() * w;
}

}  // namespace sparsefield
