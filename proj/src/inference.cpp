#include "sparsefield/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace sparsefield {

namespace {
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
}

double GaussianStructure::log_likelihood(std::span<const double> data, double mean,
                                         double variance) const {
  if (data.size() != size()) throw PreconditionError("log_likelihood: data size mismatch");
  if (!(variance > 0.0)) throw PreconditionError("log_likelihood: variance must be positive");
  std::vector<double> resid(data.begin(), data.end());
  for (auto& v : resid) v -= mean;
  const auto n = static_cast<double>(data.size());
  return -0.5 * n * (kLog2Pi + std::log(variance)) - 0.5 * log_det() -
         0.5 * quadratic(resid) / variance;
}

// ---------------------------------------------------------------------------

DenseStructure::DenseStructure(const Matrix& omega, std::string tag) : tag_(std::move(tag)) {
  factor_ = cholesky_lower(omega, 1.0, "dense likelihood");
  log_det_ = 2.0 * factor_.diagonal().array().log().sum();
}

double DenseStructure::bilinear(std::span<const double> u, std::span<const double> v) const {
  const auto n = factor_.rows();
  if (static_cast<Eigen::Index>(u.size()) != n || static_cast<Eigen::Index>(v.size()) != n) {
    throw PreconditionError("DenseStructure: size mismatch");
  }
  const Vector wu = factor_.triangularView<Eigen::Lower>().solve(Eigen::Map<const Vector>(u.data(), n));
  const Vector wv = factor_.triangularView<Eigen::Lower>().solve(Eigen::Map<const Vector>(v.data(), n));
  return wu.dot(wv);
}

// ---------------------------------------------------------------------------

NngpStructure::NngpStructure(std::shared_ptr<const SparseFactor> unit_factor)
    : factor_(std::move(unit_factor)) {
  for (const auto& node : factor_->nodes) log_det_ += 2.0 * std::log(node.sd);
}

std::vector<double> NngpStructure::whiten(std::span<const double> u) const {
  if (u.size() != factor_->size()) throw PreconditionError("NngpStructure: size mismatch");
  std::vector<double> e(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto& node = factor_->nodes[i];
    double pred = 0.0;
    for (std::size_t k = 0; k < node.neighbors.size(); ++k) {
      pred += node.coeffs[static_cast<Eigen::Index>(k)] * u[static_cast<std::size_t>(node.neighbors[k])];
    }
    e[i] = (u[i] - pred) / node.sd;
  }
  return e;
}

double NngpStructure::bilinear(std::span<const double> u, std::span<const double> v) const {
  const auto eu = whiten(u);
  const auto ev = whiten(v);
  return std::inner_product(eu.begin(), eu.end(), ev.begin(), 0.0);
}

// ---------------------------------------------------------------------------

PcgpStructure::PcgpStructure(const PcgpModel& unit_model, std::span<const Location> targets)
    : n_(targets.size()), r_(unit_model.refset->size()) {
  if (unit_model.model.mean != 0.0 || unit_model.model.variance != 1.0) {
    throw PreconditionError("PcgpStructure: model must be standardized (mean 0, variance 1)");
  }
  blocks_ = build_block_conditionals(unit_model, targets);
  const auto& factor = *unit_model.factor;
  const auto r = static_cast<Eigen::Index>(r_);

  // Sigma_S^{-1} = (I - B)^T F^{-1} (I - B), accumulated row by row.
  Matrix core = Matrix::Zero(r, r);
  double log_det_ref = 0.0;
  for (std::size_t i = 0; i < factor.size(); ++i) {
    const auto& node = factor.nodes[i];
    std::vector<int> idx{static_cast<int>(i)};
    std::vector<double> w{1.0 / node.sd};
    for (std::size_t k = 0; k < node.neighbors.size(); ++k) {
      idx.push_back(node.neighbors[k]);
      w.push_back(-node.coeffs[static_cast<Eigen::Index>(k)] / node.sd);
    }
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = 0; b < idx.size(); ++b) core(idx[a], idx[b]) += w[a] * w[b];
    }
    log_det_ref += 2.0 * std::log(node.sd);
  }

  double log_det_blocks = 0.0;
  whitened_coeffs_.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    log_det_blocks += 2.0 * b.factor.diagonal().array().log().sum();
    Matrix g = b.factor.triangularView<Eigen::Lower>().solve(b.coeffs);
    const Matrix gtg = g.transpose() * g;
    for (std::size_t a = 0; a < b.neighbors.size(); ++a) {
      for (std::size_t c = 0; c < b.neighbors.size(); ++c) {
        core(b.neighbors[a], b.neighbors[c]) +=
            gtg(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
      }
    }
    whitened_coeffs_.push_back(std::move(g));
  }
  Eigen::LLT<Matrix> llt(core);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("PcgpStructure: coupling core matrix is not positive definite");
  }
  core_factor_ = llt.matrixL();
  // det(Omega) = det(B) det(Sigma_S) det(Sigma_S^{-1} + A^T B^{-1} A).
  log_det_ = log_det_blocks + log_det_ref + 2.0 * core_factor_.diagonal().array().log().sum();
}

PcgpStructure::Whitened PcgpStructure::whiten(std::span<const double> u) const {
  if (u.size() != n_) throw PreconditionError("PcgpStructure: size mismatch");
  Whitened w;
  w.coupling = Vector::Zero(static_cast<Eigen::Index>(r_));
  w.per_block.reserve(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    Vector uk(static_cast<Eigen::Index>(b.members.size()));
    for (std::size_t i = 0; i < b.members.size(); ++i) uk[static_cast<Eigen::Index>(i)] = u[b.members[i]];
    Vector x = b.factor.triangularView<Eigen::Lower>().solve(uk);
    const Vector t = whitened_coeffs_[k].transpose() * x;
    for (std::size_t a = 0; a < b.neighbors.size(); ++a) {
      w.coupling[b.neighbors[a]] += t[static_cast<Eigen::Index>(a)];
    }
    w.per_block.push_back(std::move(x));
  }
  return w;
}

double PcgpStructure::bilinear(std::span<const double> u, std::span<const double> v) const {
  const auto wu = whiten(u);
  const auto wv = whiten(v);
  double direct = 0.0;
  for (std::size_t k = 0; k < blocks_.size(); ++k) direct += wu.per_block[k].dot(wv.per_block[k]);
  const Vector su = core_factor_.triangularView<Eigen::Lower>().solve(wu.coupling);
  const Vector sv = core_factor_.triangularView<Eigen::Lower>().solve(wv.coupling);
  return direct - su.dot(sv);
}

// ---------------------------------------------------------------------------

double nngp_loglik(const SparseFactor& unit_factor, std::span<const double> data, double mean,
                   double variance) {
  if (data.size() != unit_factor.size()) throw PreconditionError("nngp_loglik: data must lie on the reference set");
  if (!(variance > 0.0)) throw PreconditionError("nngp_loglik: variance must be positive");
  const double sigma = std::sqrt(variance);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& node = unit_factor.nodes[i];
    double cmean = mean;
    for (std::size_t k = 0; k < node.neighbors.size(); ++k) {
      cmean += node.coeffs[static_cast<Eigen::Index>(k)] *
               (data[static_cast<std::size_t>(node.neighbors[k])] - mean);
    }
    const double sd = sigma * node.sd;
    const double z = (data[i] - cmean) / sd;
    total += -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
  }
  return total;
}

double pcgp_marginal_loglik(const PcgpStructure& structure, std::span<const double> data,
                            double mean, double variance) {
  return structure.log_likelihood(data, mean, variance);
}

MleResult profile_mle(const GaussianStructure& structure, std::span<const double> data) {
  const std::size_t n = structure.size();
  if (data.size() != n) throw PreconditionError("profile_mle: data size mismatch");
  if (n < 2) throw PreconditionError("profile_mle: need at least two observations");
  const std::vector<double> ones(n, 1.0);
  const double info = structure.quadratic(ones);
  if (!(info > 0.0) || !std::isfinite(info)) throw std::runtime_error("profile_mle: degenerate correlation structure");
  MleResult r;
  r.model = structure.tag();
  r.n = n;
  r.mean = structure.bilinear(ones, data) / info;
  std::vector<double> resid(data.begin(), data.end());
  for (auto& v : resid) v -= r.mean;
  r.variance = structure.quadratic(resid) / static_cast<double>(n);
  if (!(r.variance > kVarianceFloor)) {
    r.variance = kVarianceFloor;
    r.degenerate = true;
  }
  r.loglik = structure.log_likelihood(data, r.mean, r.variance);
  r.mean_se = std::sqrt(r.variance / info);
  r.variance_se = r.variance * std::sqrt(2.0 / static_cast<double>(n));
  return r;
}

SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                          std::span<const double> start, std::span<const double> steps,
                          const SimplexOptions& options) {
  const std::size_t d = start.size();
  if (d == 0 || steps.size() != d) throw PreconditionError("nelder_mead: bad start/steps");
  using Point = std::vector<double>;
  std::vector<Point> x(d + 1, Point(start.begin(), start.end()));
  for (std::size_t i = 0; i < d; ++i) x[i + 1][i] += steps[i];
  std::vector<double> f(d + 1);
  for (std::size_t i = 0; i <= d; ++i) f[i] = objective(x[i]);

  auto combine = [&](const Point& c, const Point& p, double t) {
    Point out(d);
    for (std::size_t k = 0; k < d; ++k) out[k] = c[k] + t * (p[k] - c[k]);
    return out;
  };
  std::vector<std::size_t> order(d + 1);
  for (int it = 0; it < options.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[d - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= d; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        diameter = std::max(diameter, std::abs(x[i][k] - x[best][k]) / std::abs(steps[k]));
      }
    }
    if (diameter < options.tolerance) return {x[best], f[best], it};

    Point centroid(d, 0.0);
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < d; ++k) centroid[k] += x[i][k] / static_cast<double>(d);
    }
    const Point xr = combine(centroid, x[worst], -1.0);
    const double fr = objective(xr);
    if (fr < f[best]) {
      const Point xe = combine(centroid, x[worst], -2.0);
      const double fe = objective(xe);
      if (fe < fr) {
        x[worst] = xe;
        f[worst] = fe;
      } else {
        x[worst] = xr;
        f[worst] = fr;
      }
      continue;
    }
    if (fr < f[second]) {
      x[worst] = xr;
      f[worst] = fr;
      continue;
    }
    const bool outside = fr < f[worst];
    const Point xc = combine(centroid, outside ? xr : x[worst], 0.5);
    const double fc = objective(xc);
    if (fc < std::min(fr, f[worst])) {
      x[worst] = xc;
      f[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == best) continue;
      x[i] = combine(x[best], x[i], 0.5);
      f[i] = objective(x[i]);
    }
  }
  throw std::runtime_error("nelder_mead: no convergence within the iteration limit");
}

std::array<double, 2> optimize_crosscheck(
    const std::function<double(double mean, double variance)>& loglik, double mean0,
    double variance0, const SimplexOptions& options) {
  if (!(variance0 > 0.0)) throw PreconditionError("optimize_crosscheck: initial variance must be positive");
  const std::array<double, 2> start{mean0, std::log(variance0)};
  const std::array<double, 2> steps{0.1 * std::max(1.0, std::abs(mean0)), 0.1};
  const auto res = nelder_mead(
      [&](std::span<const double> p) { return -loglik(p[0], std::exp(p[1])); }, start, steps, options);
  return {res.argmin[0], std::exp(res.argmin[1])};
}

}  // namespace sparsefield
