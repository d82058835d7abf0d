#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sparsefield/covariance.hpp"
#include "sparsefield/functionals.hpp"
#include "sparsefield/inference.hpp"
#include "sparsefield/pcgp.hpp"
#include "sparsefield/sparse_process.hpp"

namespace sparsefield {

struct ParentGp {
  CovarianceModel model;
};

/// NNGP or RNGP, depending on the reference set's neighbor rule.  Targets use
/// `target_rule` (normally the same rule).
struct NngpField {
  std::shared_ptr<const ReferenceSet> refset;
  std::shared_ptr<const SparseFactor> factor;
  NeighborRule target_rule = NearestM{};
};

struct PcgpField {
  PcgpModel pcgp;
};

struct MpcgpField {
  MpcgpModel mpcgp;
};

using FieldModel = std::variant<ParentGp, NngpField, PcgpField, MpcgpField>;

/// "GP", "NNGP", "RNGP", "PCGP" or "mPCGP".
std::string model_tag(const FieldModel& model);
const CovarianceModel& covariance_model(const FieldModel& model);

/// Convenience constructors.  Reference locations are ordered by `ordering`.
NngpField make_nngp_field(const CovarianceModel& model, LocationList reference,
                          NeighborRule rule, OrderingRule ordering = OrderingRule::kSortedCoordinate);
PcgpField make_pcgp_field(const NngpField& reference_process, const Partition& partition,
                          int region_neighbors, std::size_t block_cap = kDefaultBlockCap);
MpcgpField make_mpcgp_field(const PcgpField& base, std::span<const int> counts, int components);

/// A model bound to a fixed target set.  All per-geometry work (conditionals,
/// block factors) happens in the constructor, so replications only draw.
class FieldSampler {
 public:
  FieldSampler(FieldModel model, LocationList targets);

  const FieldModel& model() const { return model_; }
  const LocationList& targets() const { return targets_; }
  std::size_t size() const { return targets_.size(); }
  /// 0 for the parent GP.
  std::size_t reference_size() const;
  bool has_reference() const { return reference_size() > 0; }

  /// Unconditional draw: Z_S from key.child(0), targets from key.child(1).
  void simulate(StreamKey key, std::span<double> out) const;
  /// Draw of the targets given Z_S = z_ref (not available for the parent GP).
  void simulate_given(std::span<const double> z_ref, StreamKey key, std::span<double> out) const;
  Vector simulate_reference(StreamKey key) const;

  /// E[Z_targets | Z_S = z_ref].
  Vector conditional_mean(std::span<const double> z_ref) const;
  /// Var(mean of Z over the targets | Z_S); for the parent GP the marginal
  /// variance of the mean.
  double conditional_variance_of_mean() const;

  /// Exact covariance of the targets under the model (dense, size-capped).
  Matrix implied_covariance() const;

  const TargetConditionals* nngp_conditionals() const;

 private:
  FieldModel model_;
  LocationList targets_;
  TargetConditionals conds_;          // NNGP/RNGP
  BlockList blocks_;                  // PCGP
  std::vector<BlockList> components_; // mPCGP
  Matrix parent_factor_;              // parent GP
};

Matrix implied_covariance(const FieldModel& model, std::span<const Location> targets);

/// Correlation structure of the model at the targets with unit variance.
/// NNGP data must sit exactly on the reference set (in reference order);
/// mPCGP and the parent GP use a dense factorisation.
std::unique_ptr<GaussianStructure> make_structure(const FieldModel& model,
                                                  std::span<const Location> targets);

double log_likelihood(const FieldModel& model, std::span<const Location> targets,
                      std::span<const double> data);

/// Copy of a factor rescaled to mean 0 and unit variance.  Coefficients are
/// invariant to the scaling.
SparseFactor unit_factor(const SparseFactor& factor);

/// divergence_probe over a field model.  With `z_ref` the draws are
/// conditional on that reference vector; otherwise Z_S is redrawn per
/// replication.  Replication k uses key.child(k).
std::vector<DivergenceLevel> divergence_probe(const FieldModel& model, const GridSchedule& coarsest,
                                              int levels, std::size_t replications, StreamKey key,
                                              std::span<const double> z_ref = {});

}  // namespace sparsefield
