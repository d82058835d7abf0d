#include "sparsefield/sparse_process.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "sparsefield/parallel.hpp"

namespace sparsefield {

namespace {

NodeConditional make_node(const CovarianceModel& model, const LocationList& ref,
                          const Location& at, std::vector<int> neighbors) {
  LocationList cond;
  cond.reserve(neighbors.size());
  for (int j : neighbors) cond.push_back(ref[static_cast<std::size_t>(j)]);
  const auto g = condition(model, std::span<const Location>(&at, 1), cond);
  NodeConditional node;
  node.neighbors = std::move(neighbors);
  node.coeffs = g.coeffs.row(0).transpose();
  node.offset = g.offset[0];
  const double floor = kRelativeSdFloor * std::sqrt(model.variance);
  node.sd = std::max(std::sqrt(std::max(g.covariance(0, 0), 0.0)), floor);
  return node;
}

std::vector<int> predecessor_neighbors(const ReferenceSet& refset, std::size_t i) {
  const auto& u = refset.locations[i];
  return std::visit(
      [&](const auto& rule) -> std::vector<int> {
        using R = std::decay_t<decltype(rule)>;
        if constexpr (std::is_same_v<R, NearestM>) {
          return refset.index->nearest(u, rule.m, i);
        } else if constexpr (std::is_same_v<R, Radius>) {
          return refset.index->within(u, rule.radius, i);
        } else {
          std::vector<int> all(i);
          std::iota(all.begin(), all.end(), 0);
          return all;
        }
      },
      refset.rule);
}

std::vector<int> target_neighbors(const ReferenceSet& refset, const Location& u,
                                  const NeighborRule& rule) {
  const auto closest = refset.index->nearest(u, 1);
  if (!closest.empty() && refset.locations[static_cast<std::size_t>(closest[0])] == u) {
    throw PreconditionError("target coincides with reference location " + std::to_string(closest[0]));
  }
  return std::visit(
      [&](const auto& r) -> std::vector<int> {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, NearestM>) {
          return refset.index->nearest(u, r.m);
        } else if constexpr (std::is_same_v<R, Radius>) {
          return refset.index->within(u, r.radius);
        } else {
          std::vector<int> all(refset.size());
          std::iota(all.begin(), all.end(), 0);
          return all;
        }
      },
      rule);
}

void check_rule(const NeighborRule& rule) {
  if (const auto* nm = std::get_if<NearestM>(&rule); nm && nm->m < 0) {
    throw PreconditionError("nearest-neighbor rule: m must be >= 0");
  }
  if (const auto* rr = std::get_if<Radius>(&rule); rr && !(rr->radius > 0.0)) {
    throw PreconditionError("radius rule: radius must be positive");
  }
}

void check_draw_sizes(const TargetConditionals& conds, std::span<double> out,
                      std::span<const std::uint64_t> ids) {
  if (out.size() != conds.size()) throw PreconditionError("simulate_targets: output size mismatch");
  if (!ids.empty() && ids.size() != conds.size()) throw PreconditionError("simulate_targets: id list size mismatch");
}

inline double draw_target(const NodeConditional& c, std::span<const double> z_ref, StreamKey key,
                          std::uint64_t i) {
  RandomStream stream(key.child(i));
  return c.conditional_mean(z_ref) + c.sd * stream.normal();
}

}  // namespace

std::vector<std::size_t> order_reference(std::span<const Location> locs, OrderingRule rule,
                                         StreamKey key) {
  if (locs.empty()) throw PreconditionError("order_reference: empty location list");
  std::vector<std::size_t> p(locs.size());
  std::iota(p.begin(), p.end(), 0);
  switch (rule) {
    case OrderingRule::kAsGiven:
      break;
    case OrderingRule::kSortedCoordinate:
      std::stable_sort(p.begin(), p.end(), [&](std::size_t a, std::size_t b) {
        const auto& u = locs[a];
        const auto& v = locs[b];
        return std::lexicographical_compare(u.x.begin(), u.x.begin() + u.dim, v.x.begin(),
                                            v.x.begin() + v.dim);
      });
      break;
    case OrderingRule::kRandom: {
      // Fisher-Yates on the counter-based stream; std::shuffle's algorithm is
      // implementation-defined.
      RandomStream stream(key);
      for (std::size_t i = p.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(stream.uniform() * static_cast<double>(i));
        std::swap(p[i - 1], p[std::min(j, i - 1)]);
      }
      break;
    }
  }
  return p;
}

ReferenceSet make_reference_set(LocationList locs, OrderingRule ordering, NeighborRule rule,
                                StreamKey key) {
  check_rule(rule);
  ReferenceSet refset;
  refset.order = order_reference(locs, ordering, key);
  refset.ordering = ordering;
  refset.rule = rule;
  refset.locations.reserve(locs.size());
  for (auto i : refset.order) refset.locations.push_back(locs[i]);
  refset.index = std::make_shared<const NeighborIndex>(refset.locations);
  refset.neighbors.resize(refset.size());
  parallel_for(static_cast<std::ptrdiff_t>(refset.size()), [&](std::ptrdiff_t i) {
    refset.neighbors[i] = predecessor_neighbors(refset, static_cast<std::size_t>(i));
  });
  return refset;
}

double NodeConditional::conditional_mean(std::span<const double> z_ref) const {
  double m = offset;
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    m += coeffs[static_cast<Eigen::Index>(k)] * z_ref[static_cast<std::size_t>(neighbors[k])];
  }
  return m;
}

SparseFactor build_reference_factor(const CovarianceModel& model, const ReferenceSet& refset) {
  model.validate();
  SparseFactor f{model, std::vector<NodeConditional>(refset.size())};
  parallel_for(static_cast<std::ptrdiff_t>(refset.size()), [&](std::ptrdiff_t i) {
    f.nodes[i] = make_node(model, refset.locations, refset.locations[i], refset.neighbors[i]);
  });
  return f;
}

double reference_logdensity(const SparseFactor& factor, std::span<const double> z) {
  if (z.size() != factor.size()) throw PreconditionError("reference_logdensity: size mismatch");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (std::size_t i = 0; i < factor.size(); ++i) {
    if (!std::isfinite(z[i])) throw PreconditionError("reference_logdensity: non-finite input");
    const auto& node = factor.nodes[i];
    const double r = (z[i] - node.conditional_mean(z)) / node.sd;
    total += -half_log_2pi - std::log(node.sd) - 0.5 * r * r;
  }
  return total;
}

Vector simulate_reference(const SparseFactor& factor, StreamKey key) {
  RandomStream stream(key);
  Vector z(static_cast<Eigen::Index>(factor.size()));
  const std::span<const double> view(z.data(), factor.size());
  for (std::size_t i = 0; i < factor.size(); ++i) {
    const auto& node = factor.nodes[i];
    z[static_cast<Eigen::Index>(i)] = node.conditional_mean(view) + node.sd * stream.normal();
  }
  return z;
}

TargetConditionals target_conditionals(const CovarianceModel& model, const ReferenceSet& refset,
                                       std::span<const Location> targets) {
  return target_conditionals(model, refset, targets, refset.rule);
}

TargetConditionals target_conditionals(const CovarianceModel& model, const ReferenceSet& refset,
                                       std::span<const Location> targets, const NeighborRule& rule) {
  model.validate();
  check_rule(rule);
  TargetConditionals conds(targets.size());
  parallel_for(static_cast<std::ptrdiff_t>(targets.size()), [&](std::ptrdiff_t i) {
    conds[i] = make_node(model, refset.locations, targets[i], target_neighbors(refset, targets[i], rule));
  });
  return conds;
}

Vector simulate_targets(const TargetConditionals& conds, std::span<const double> z_ref,
                        StreamKey key) {
  Vector out(static_cast<Eigen::Index>(conds.size()));
  simulate_targets_into(conds, z_ref, key, std::span<double>(out.data(), conds.size()));
  return out;
}

void simulate_targets_into(const TargetConditionals& conds, std::span<const double> z_ref,
                           StreamKey key, std::span<double> out, std::span<const std::uint64_t> ids) {
  check_draw_sizes(conds, out, ids);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(conds.size()); ++i) {
    out[i] = draw_target(conds[i], z_ref, key, ids.empty() ? static_cast<std::uint64_t>(i) : ids[i]);
  }
}

Matrix reference_covariance(const SparseFactor& factor) {
  const auto r = static_cast<Eigen::Index>(factor.size());
  if (static_cast<std::size_t>(r) * static_cast<std::size_t>(r) > kImpliedCovarianceCap) {
    throw PreconditionError("reference_covariance: reference set too large for a dense oracle");
  }
  // Z = B Z + F^{1/2} W  =>  Z = (I - B)^{-1} F^{1/2} W.
  Matrix i_minus_b = Matrix::Identity(r, r);
  Matrix sd = Matrix::Zero(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& node = factor.nodes[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < node.neighbors.size(); ++k) {
      i_minus_b(i, node.neighbors[k]) -= node.coeffs[static_cast<Eigen::Index>(k)];
    }
    sd(i, i) = node.sd;
  }
  const Matrix l = i_minus_b.triangularView<Eigen::UnitLower>().solve(sd);
  return l * l.transpose();
}

Matrix coefficient_matrix(const TargetConditionals& conds, std::size_t reference_size) {
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(conds.size()),
                          static_cast<Eigen::Index>(reference_size));
  for (std::size_t i = 0; i < conds.size(); ++i) {
    const auto& c = conds[i];
    for (std::size_t k = 0; k < c.neighbors.size(); ++k) {
      a(static_cast<Eigen::Index>(i), c.neighbors[k]) += c.coeffs[static_cast<Eigen::Index>(k)];
    }
  }
  return a;
}

Matrix implied_covariance_nngp(const SparseFactor& factor, const TargetConditionals& conds) {
  return implied_covariance_nngp(reference_covariance(factor), conds);
}

Matrix implied_covariance_nngp(const Matrix& ref_cov, const TargetConditionals& conds) {
  const auto n = static_cast<Eigen::Index>(conds.size());
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(ref_cov.rows()) > kImpliedCovarianceCap) {
    throw PreconditionError("implied_covariance_nngp: instance too large for a dense oracle");
  }
  Matrix cov(n, n);
  for (Eigen::Index u = 0; u < n; ++u) {
    const auto& cu = conds[static_cast<std::size_t>(u)];
    for (Eigen::Index v = 0; v <= u; ++v) {
      const auto& cv = conds[static_cast<std::size_t>(v)];
      double s = 0.0;
      for (std::size_t a = 0; a < cu.neighbors.size(); ++a) {
        for (std::size_t b = 0; b < cv.neighbors.size(); ++b) {
          s += cu.coeffs[static_cast<Eigen::Index>(a)] * ref_cov(cu.neighbors[a], cv.neighbors[b]) *
               cv.coeffs[static_cast<Eigen::Index>(b)];
        }
      }
      if (u == v) s += cu.sd * cu.sd;
      cov(u, v) = cov(v, u) = s;
    }
  }
  return cov;
}

namespace serial {

SparseFactor build_reference_factor(const CovarianceModel& model, const ReferenceSet& refset) {
  model.validate();
  SparseFactor f{model, {}};
  f.nodes.reserve(refset.size());
  for (std::size_t i = 0; i < refset.size(); ++i) {
    f.nodes.push_back(make_node(model, refset.locations, refset.locations[i], refset.neighbors[i]));
  }
  return f;
}

TargetConditionals target_conditionals(const CovarianceModel& model, const ReferenceSet& refset,
                                       std::span<const Location> targets, const NeighborRule& rule) {
  model.validate();
  check_rule(rule);
  TargetConditionals conds;
  conds.reserve(targets.size());
  for (const auto& t : targets) {
    conds.push_back(make_node(model, refset.locations, t, target_neighbors(refset, t, rule)));
  }
  return conds;
}

void simulate_targets_into(const TargetConditionals& conds, std::span<const double> z_ref,
                           StreamKey key, std::span<double> out, std::span<const std::uint64_t> ids) {
  check_draw_sizes(conds, out, ids);
  for (std::size_t i = 0; i < conds.size(); ++i) out[i] = draw_target(conds[i], z_ref, key, ids.empty() ? i : ids[i]);
}

}  // namespace serial

}  // namespace sparsefield
