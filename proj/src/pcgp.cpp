#include "sparsefield/pcgp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "sparsefield/parallel.hpp"

namespace sparsefield {

namespace {

void check_not_reference(const ReferenceSet& refset, const Location& u, std::size_t target) {
  const auto closest = refset.index->nearest(u, 1);
  if (!closest.empty() && refset.locations[static_cast<std::size_t>(closest[0])] == u) {
    throw PreconditionError("target " + std::to_string(target) + " coincides with reference location " +
                            std::to_string(closest[0]));
  }
}

BlockConditional make_block(const PcgpModel& pm, std::span<const Location> targets,
                            std::size_t cell, std::vector<std::size_t> members) {
  if (members.size() > pm.block_cap) {
    throw PreconditionError("cell " + std::to_string(cell) + " holds " + std::to_string(members.size()) +
                            " targets (cap " + std::to_string(pm.block_cap) +
                            "); use a finer partition");
  }
  LocationList locs;
  locs.reserve(members.size());
  for (auto i : members) {
    check_not_reference(*pm.refset, targets[i], i);
    locs.push_back(targets[i]);
  }
  const auto& set = pm.region_sets[cell];
  LocationList cond;
  cond.reserve(set.size());
  for (int j : set) cond.push_back(pm.refset->locations[static_cast<std::size_t>(j)]);

  auto g = condition(pm.model, locs, cond);
  BlockConditional b;
  b.cell = cell;
  b.members = std::move(members);
  b.neighbors = set;
  b.coeffs = std::move(g.coeffs);
  b.offset = std::move(g.offset);
  b.factor = cholesky_lower(g.covariance, pm.model.variance, "PCGP block conditional");
  b.covariance = std::move(g.covariance);
  return b;
}

void draw_block(const BlockConditional& b, std::span<const double> z_ref, StreamKey key,
                std::span<double> out, double scale) {
  RandomStream stream(key.child(b.cell));
  Vector w(static_cast<Eigen::Index>(b.members.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = stream.normal();
  const Vector noise = b.factor.triangularView<Eigen::Lower>() * w;
  const Vector mean = b.conditional_mean(z_ref);
  const double s = std::sqrt(scale);
  for (std::size_t i = 0; i < b.members.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out[b.members[i]] = mean[k] + s * noise[k];
  }
}

}  // namespace

std::vector<std::vector<int>> region_neighbor_sets(const Partition& partition,
                                                   const ReferenceSet& refset, int region_neighbors) {
  if (refset.size() == 0) throw PreconditionError("region_neighbor_sets: empty reference set");
  if (region_neighbors < 0) throw PreconditionError("region_neighbor_sets: m must be >= 0");
  std::vector<std::vector<int>> sets(partition.cell_count);
  for (std::size_t k = 0; k < partition.cell_count; ++k) {
    sets[k] = refset.index->nearest(partition.centroids[k], region_neighbors);
  }
  return sets;
}

PcgpModel make_pcgp_model(const CovarianceModel& model, std::shared_ptr<const ReferenceSet> refset,
                          std::shared_ptr<const SparseFactor> factor, Partition partition,
                          int region_neighbors, std::size_t block_cap) {
  model.validate();
  if (!refset || !factor || factor->size() != refset->size()) {
    throw PreconditionError("make_pcgp_model: reference set and factor do not match");
  }
  PcgpModel pm{model, std::move(refset), std::move(factor), std::move(partition), region_neighbors,
               {}, block_cap};
  pm.region_sets = region_neighbor_sets(pm.partition, *pm.refset, region_neighbors);
  return pm;
}

Vector BlockConditional::conditional_mean(std::span<const double> z_ref) const {
  Vector zn(static_cast<Eigen::Index>(neighbors.size()));
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    zn[static_cast<Eigen::Index>(k)] = z_ref[static_cast<std::size_t>(neighbors[k])];
  }
  return offset + coeffs * zn;
}

std::vector<std::pair<std::size_t, std::vector<std::size_t>>> group_by_cell(
    const Partition& partition, std::span<const Location> targets) {
  std::map<std::size_t, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < targets.size(); ++i) cells[locate_cell(partition, targets[i])].push_back(i);
  return {cells.begin(), cells.end()};
}

BlockList build_block_conditionals(const PcgpModel& model, std::span<const Location> targets) {
  auto groups = group_by_cell(model.partition, targets);
  BlockList blocks(groups.size());
  parallel_for(static_cast<std::ptrdiff_t>(groups.size()), [&](std::ptrdiff_t k) {
    blocks[k] = make_block(model, targets, groups[k].first, std::move(groups[k].second));
  });
  return blocks;
}

void simulate_blocks_into(const BlockList& blocks, std::span<const double> z_ref, StreamKey key,
                          std::span<double> out, double scale) {
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(blocks.size()); ++k) {
    draw_block(blocks[k], z_ref, key, out, scale);
  }
}

Vector simulate_pcgp(const PcgpModel& model, std::span<const Location> targets,
                     std::span<const double> z_ref, StreamKey key) {
  if (z_ref.size() != model.refset->size()) throw PreconditionError("simulate_pcgp: z_ref size mismatch");
  const auto blocks = build_block_conditionals(model, targets);
  Vector out(static_cast<Eigen::Index>(targets.size()));
  simulate_blocks_into(blocks, z_ref, key, std::span<double>(out.data(), targets.size()));
  return out;
}

Matrix block_coefficient_matrix(const BlockList& blocks, std::size_t target_count,
                                std::size_t reference_size) {
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(target_count),
                          static_cast<Eigen::Index>(reference_size));
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.members.size(); ++i) {
      for (std::size_t k = 0; k < b.neighbors.size(); ++k) {
        a(static_cast<Eigen::Index>(b.members[i]), b.neighbors[k]) +=
            b.coeffs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      }
    }
  }
  return a;
}

namespace {

void add_blockdiag(const BlockList& blocks, double weight, Matrix& cov) {
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.members.size(); ++i) {
      for (std::size_t j = 0; j < b.members.size(); ++j) {
        cov(static_cast<Eigen::Index>(b.members[i]), static_cast<Eigen::Index>(b.members[j])) +=
            weight * b.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  }
}

void check_dense_size(std::size_t n, std::size_t r) {
  if (n * std::max(n, r) > kImpliedCovarianceCap) {
    throw PreconditionError("implied covariance: instance too large for a dense oracle");
  }
}

}  // namespace

Matrix implied_covariance_pcgp(const BlockList& blocks, std::size_t target_count,
                               const Matrix& ref_cov) {
  check_dense_size(target_count, static_cast<std::size_t>(ref_cov.rows()));
  const Matrix a = block_coefficient_matrix(blocks, target_count, static_cast<std::size_t>(ref_cov.rows()));
  Matrix cov = a * ref_cov * a.transpose();
  add_blockdiag(blocks, 1.0, cov);
  return cov;
}

Matrix implied_covariance_pcgp(const PcgpModel& model, std::span<const Location> targets) {
  check_dense_size(targets.size(), model.refset->size());
  return implied_covariance_pcgp(build_block_conditionals(model, targets), targets.size(),
                                 reference_covariance(*model.factor));
}

std::vector<Partition> make_shifted_partitions(const Domain& domain, std::span<const int> counts,
                                               int components) {
  const int dim = domain.dim();
  std::vector<std::vector<double>> fractions;  // shift per axis, in cell sides
  if (components == 1) {
    fractions = {std::vector<double>(dim, 0.0)};
  } else if (components == 2 && (dim == 1 || dim == 2)) {
    fractions = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.5)};
  } else if (components == 4 && dim == 2) {
    fractions = {{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.5}, {0.5, 0.5}};
  } else {
    throw PreconditionError("make_shifted_partitions: unsupported G=" + std::to_string(components) +
                            " for d=" + std::to_string(dim));
  }
  const Partition base = make_partition(domain, counts);
  std::vector<Partition> out;
  for (const auto& f : fractions) {
    std::vector<double> offset(dim);
    for (int a = 0; a < dim; ++a) offset[a] = f[a] * base.side[a];
    out.push_back(make_partition(domain, counts, offset));
  }
  return out;
}

MpcgpModel make_mpcgp_model(const PcgpModel& base, std::span<const int> counts, int components) {
  MpcgpModel m;
  for (auto& p : make_shifted_partitions(base.partition.domain, counts, components)) {
    m.components.push_back(make_pcgp_model(base.model, base.refset, base.factor, std::move(p),
                                           base.region_neighbors, base.block_cap));
  }
  return m;
}

std::vector<BlockList> build_mpcgp_blocks(const MpcgpModel& model, std::span<const Location> targets) {
  std::vector<BlockList> out;
  for (const auto& c : model.components) out.push_back(build_block_conditionals(c, targets));
  return out;
}

void simulate_mpcgp_into(const std::vector<BlockList>& blocks, std::span<const double> z_ref,
                         StreamKey key, std::span<double> out) {
  const auto g = static_cast<double>(blocks.size());
  if (blocks.size() == 1) {
    simulate_blocks_into(blocks[0], z_ref, key, out);
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> component(out.size());
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const StreamKey ck = j == 0 ? key : key.child(kComponentStreamBase + j);
    simulate_blocks_into(blocks[j], z_ref, ck, component, g);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += component[i];
  }
  for (auto& v : out) v /= g;
}

Vector simulate_mpcgp(const MpcgpModel& model, std::span<const Location> targets,
                      std::span<const double> z_ref, StreamKey key) {
  const auto blocks = build_mpcgp_blocks(model, targets);
  Vector out(static_cast<Eigen::Index>(targets.size()));
  simulate_mpcgp_into(blocks, z_ref, key, std::span<double>(out.data(), targets.size()));
  return out;
}

Matrix implied_covariance_mpcgp(const MpcgpModel& model, std::span<const Location> targets) {
  if (model.components.empty()) throw PreconditionError("implied_covariance_mpcgp: no components");
  const auto& first = model.components.front();
  check_dense_size(targets.size(), first.refset->size());
  const Matrix ref_cov = reference_covariance(*first.factor);
  const double g = static_cast<double>(model.size());
  Matrix a_bar = Matrix::Zero(static_cast<Eigen::Index>(targets.size()), ref_cov.rows());
  Matrix blockdiag = Matrix::Zero(static_cast<Eigen::Index>(targets.size()),
                                  static_cast<Eigen::Index>(targets.size()));
  for (const auto& c : model.components) {
    const auto blocks = build_block_conditionals(c, targets);
    a_bar += block_coefficient_matrix(blocks, targets.size(), c.refset->size()) / g;
    // Var of (1/G) sum of G independent draws with covariance G * Sigma_j.
    add_blockdiag(blocks, 1.0 / g, blockdiag);
  }
  return a_bar * ref_cov * a_bar.transpose() + blockdiag;
}

namespace serial {

BlockList build_block_conditionals(const PcgpModel& model, std::span<const Location> targets) {
  BlockList blocks;
  for (auto& [cell, members] : group_by_cell(model.partition, targets)) {
    blocks.push_back(make_block(model, targets, cell, std::move(members)));
  }
  return blocks;
}

void simulate_blocks_into(const BlockList& blocks, std::span<const double> z_ref, StreamKey key,
                          std::span<double> out, double scale) {
  for (const auto& b : blocks) draw_block(b, z_ref, key, out, scale);
}

}  // namespace serial

}  // namespace sparsefield
