#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "sparsefield/covariance.hpp"
#include "sparsefield/geometry.hpp"
#include "sparsefield/sparse_process.hpp"

namespace sparsefield {

/// Piecewise continuous GP: a sparse (or full) reference factor plus a box
/// partition.  Given Z_S, each cell follows the parent GP conditioned on the
/// reference locations nearest its centroid, independently of other cells.
struct PcgpModel {
  CovarianceModel model;
  std::shared_ptr<const ReferenceSet> refset;
  std::shared_ptr<const SparseFactor> factor;
  Partition partition;
  int region_neighbors = 15;                 // m-double-dot
  std::vector<std::vector<int>> region_sets;  // per cell, indices into refset
  std::size_t block_cap = 2000;
};

inline constexpr std::size_t kDefaultBlockCap = 2000;

/// The min(m, r) reference locations nearest each centroid, ties by index.
std::vector<std::vector<int>> region_neighbor_sets(const Partition& partition,
                                                   const ReferenceSet& refset, int region_neighbors);

PcgpModel make_pcgp_model(const CovarianceModel& model, std::shared_ptr<const ReferenceSet> refset,
                          std::shared_ptr<const SparseFactor> factor, Partition partition,
                          int region_neighbors, std::size_t block_cap = kDefaultBlockCap);

/// Parent-GP conditional law of the targets falling in one cell.
struct BlockConditional {
  std::size_t cell = 0;
  std::vector<std::size_t> members;  // target indices, ascending
  std::vector<int> neighbors;        // region set of the cell
  Matrix coeffs;                     // members x neighbors
  Vector offset;
  Matrix covariance;
  Matrix factor;                     // lower Cholesky factor of covariance

  Vector conditional_mean(std::span<const double> z_ref) const;
};

using BlockList = std::vector<BlockConditional>;

/// Cell membership of each target, grouped by cell in ascending cell order.
std::vector<std::pair<std::size_t, std::vector<std::size_t>>> group_by_cell(
    const Partition& partition, std::span<const Location> targets);

BlockList build_block_conditionals(const PcgpModel& model, std::span<const Location> targets);

/// Writes one PCGP draw given z_ref; block for cell k uses stream key.child(k).
/// `scale` multiplies every conditional covariance (mPCGP components).
void simulate_blocks_into(const BlockList& blocks, std::span<const double> z_ref, StreamKey key,
                          std::span<double> out, double scale = 1.0);

Vector simulate_pcgp(const PcgpModel& model, std::span<const Location> targets,
                     std::span<const double> z_ref, StreamKey key);

/// Dense marginal covariance of the targets: A Cov(Z_S) A^T + blockdiag.
Matrix implied_covariance_pcgp(const PcgpModel& model, std::span<const Location> targets);
Matrix implied_covariance_pcgp(const BlockList& blocks, std::size_t target_count,
                               const Matrix& ref_cov);

/// Coefficient matrix A (targets x reference) of the block conditional means.
Matrix block_coefficient_matrix(const BlockList& blocks, std::size_t target_count,
                                std::size_t reference_size);

/// Base partition plus half-cell shifted copies: G = 1, 2 (diagonal shift)
/// or 4 (all axis combinations) in 2-D; G = 1 or 2 in 1-D.
std::vector<Partition> make_shifted_partitions(const Domain& domain, std::span<const int> counts,
                                               int components);

/// Average of G PCGP components that share Z_S; each component's
/// conditional covariance is multiplied by G.
struct MpcgpModel {
  std::vector<PcgpModel> components;
  int size() const { return static_cast<int>(components.size()); }
};

MpcgpModel make_mpcgp_model(const PcgpModel& base, std::span<const int> counts, int components);

std::vector<BlockList> build_mpcgp_blocks(const MpcgpModel& model, std::span<const Location> targets);

/// Component 0 uses `key` itself, so G = 1 reproduces simulate_pcgp exactly;
/// component j > 0 uses key.child(kComponentStreamBase + j).
inline constexpr std::uint64_t kComponentStreamBase = 0x6D70636770000000ull;

void simulate_mpcgp_into(const std::vector<BlockList>& blocks, std::span<const double> z_ref,
                         StreamKey key, std::span<double> out);
Vector simulate_mpcgp(const MpcgpModel& model, std::span<const Location> targets,
                      std::span<const double> z_ref, StreamKey key);

Matrix implied_covariance_mpcgp(const MpcgpModel& model, std::span<const Location> targets);

namespace serial {

BlockList build_block_conditionals(const PcgpModel& model, std::span<const Location> targets);
void simulate_blocks_into(const BlockList& blocks, std::span<const double> z_ref, StreamKey key,
                          std::span<double> out, double scale = 1.0);

}  // namespace serial

}  // namespace sparsefield
