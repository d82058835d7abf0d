#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "sparsefield/covariance.hpp"
#include "sparsefield/geometry.hpp"
#include "sparsefield/rng.hpp"

namespace sparsefield {

/// Condition on the m closest predecessors (NNGP).
struct NearestM {
  int m = 15;
};
/// Condition on every predecessor closer than `radius` (RNGP).
struct Radius {
  double radius = 1.0;
};
/// Condition on every predecessor: recovers the exact parent marginal.
struct Full {};

using NeighborRule = std::variant<NearestM, Radius, Full>;

enum class OrderingRule { kSortedCoordinate, kRandom, kAsGiven };

/// Permutation p such that the reference order is input[p[0]], input[p[1]], ...
std::vector<std::size_t> order_reference(std::span<const Location> locs, OrderingRule rule,
                                         StreamKey key = StreamKey{});

/// Ordered reference locations with their predecessor neighbor sets.
struct ReferenceSet {
  LocationList locations;               // reference order
  std::vector<std::size_t> order;       // locations[i] == input[order[i]]
  OrderingRule ordering = OrderingRule::kSortedCoordinate;
  NeighborRule rule = NearestM{};
  std::vector<std::vector<int>> neighbors;  // ascending (distance, index); all < i
  std::shared_ptr<const NeighborIndex> index;

  std::size_t size() const { return locations.size(); }
};

ReferenceSet make_reference_set(LocationList locs, OrderingRule ordering, NeighborRule rule,
                                StreamKey key = StreamKey{});

/// One univariate conditional pi(Z_u | Z_N(u)): mean offset + coeffs . z_N.
struct NodeConditional {
  std::vector<int> neighbors;  // indices into the reference set
  Vector coeffs;
  double offset = 0.0;
  double sd = 0.0;

  double conditional_mean(std::span<const double> z_ref) const;
};

/// Ordered factorisation of the reference-set density into univariate
/// conditionals.
struct SparseFactor {
  CovarianceModel model;
  std::vector<NodeConditional> nodes;

  std::size_t size() const { return nodes.size(); }
};

/// Targets are conditionally independent given Z_S, so this is a plain list.
using TargetConditionals = std::vector<NodeConditional>;

/// Floor applied to every conditional standard deviation (relative to sigma).
inline constexpr double kRelativeSdFloor = 1e-12;

SparseFactor build_reference_factor(const CovarianceModel& model, const ReferenceSet& refset);

double reference_logdensity(const SparseFactor& factor, std::span<const double> z);

/// Sequential ancestral sampling in reference order from one stream.
Vector simulate_reference(const SparseFactor& factor, StreamKey key);

/// Per-target conditionals on the reference set.  The neighbor rule defaults
/// to the reference set's own rule.
TargetConditionals target_conditionals(const CovarianceModel& model, const ReferenceSet& refset,
                                       std::span<const Location> targets);
TargetConditionals target_conditionals(const CovarianceModel& model, const ReferenceSet& refset,
                                       std::span<const Location> targets, const NeighborRule& rule);

/// Independent draws, target i from stream key.child(ids[i]); ids defaults
/// to the position i.
Vector simulate_targets(const TargetConditionals& conds, std::span<const double> z_ref,
                        StreamKey key);
void simulate_targets_into(const TargetConditionals& conds, std::span<const double> z_ref,
                           StreamKey key, std::span<double> out,
                           std::span<const std::uint64_t> ids = {});

/// Largest number of matrix entries the dense implied-covariance oracles build.
inline constexpr std::size_t kImpliedCovarianceCap = 4'000'000;

/// Cov(Z_S) = (I - B)^{-1} F (I - B)^{-T} under the factorisation.
Matrix reference_covariance(const SparseFactor& factor);

/// Covariance of Z_targets under the NNGP/RNGP law.
Matrix implied_covariance_nngp(const SparseFactor& factor, const TargetConditionals& conds);
/// Same, given a precomputed reference_covariance().
Matrix implied_covariance_nngp(const Matrix& ref_cov, const TargetConditionals& conds);

/// Sparse n x r matrix of conditional-mean coefficients, returned dense.
Matrix coefficient_matrix(const TargetConditionals& conds, std::size_t reference_size);

namespace serial {

SparseFactor build_reference_factor(const CovarianceModel& model, const ReferenceSet& refset);
TargetConditionals target_conditionals(const CovarianceModel& model, const ReferenceSet& refset,
                                       std::span<const Location> targets, const NeighborRule& rule);
void simulate_targets_into(const TargetConditionals& conds, std::span<const double> z_ref,
                           StreamKey key, std::span<double> out,
                           std::span<const std::uint64_t> ids = {});

}  // namespace serial

}  // namespace sparsefield
