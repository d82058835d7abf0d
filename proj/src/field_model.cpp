#include "sparsefield/field_model.hpp"

#include <cmath>
#include <stdexcept>

#include "sparsefield/parallel.hpp"

namespace sparsefield {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double block_sum(const BlockList& blocks) {
  double s = 0.0;
  for (const auto& b : blocks) s += b.covariance.sum();
  return s;
}

PcgpModel unit_pcgp(const PcgpModel& pm) {
  PcgpModel u = pm;
  u.model = pm.model.standardized();
  u.factor = std::make_shared<const SparseFactor>(unit_factor(*pm.factor));
  return u;
}

}  // namespace

std::string model_tag(const FieldModel& model) {
  return std::visit(overloaded{
                        [](const ParentGp&) -> std::string { return "GP"; },
                        [](const NngpField& f) -> std::string {
                          return std::holds_alternative<Radius>(f.refset->rule) ? "RNGP" : "NNGP";
                        },
                        [](const PcgpField&) -> std::string { return "PCGP"; },
                        [](const MpcgpField&) -> std::string { return "mPCGP"; },
                    },
                    model);
}

const CovarianceModel& covariance_model(const FieldModel& model) {
  return std::visit(overloaded{
                        [](const ParentGp& f) -> const CovarianceModel& { return f.model; },
                        [](const NngpField& f) -> const CovarianceModel& { return f.factor->model; },
                        [](const PcgpField& f) -> const CovarianceModel& { return f.pcgp.model; },
                        [](const MpcgpField& f) -> const CovarianceModel& {
                          return f.mpcgp.components.front().model;
                        },
                    },
                    model);
}

NngpField make_nngp_field(const CovarianceModel& model, LocationList reference, NeighborRule rule,
                          OrderingRule ordering) {
  model.validate();
  auto refset = std::make_shared<const ReferenceSet>(make_reference_set(std::move(reference), ordering, rule));
  auto factor = std::make_shared<const SparseFactor>(build_reference_factor(model, *refset));
  return {refset, factor, rule};
}

PcgpField make_pcgp_field(const NngpField& reference_process, const Partition& partition,
                          int region_neighbors, std::size_t block_cap) {
  return {make_pcgp_model(reference_process.factor->model, reference_process.refset,
                          reference_process.factor, partition, region_neighbors, block_cap)};
}

MpcgpField make_mpcgp_field(const PcgpField& base, std::span<const int> counts, int components) {
  return {make_mpcgp_model(base.pcgp, counts, components)};
}

SparseFactor unit_factor(const SparseFactor& factor) {
  SparseFactor u = factor;
  u.model = factor.model.standardized();
  const double sigma = std::sqrt(factor.model.variance);
  for (auto& node : u.nodes) {
    node.sd /= sigma;
    node.offset = 0.0;
  }
  return u;
}

// ---------------------------------------------------------------------------

FieldSampler::FieldSampler(FieldModel model, LocationList targets)
    : model_(std::move(model)), targets_(std::move(targets)) {
  if (targets_.empty()) throw PreconditionError("FieldSampler: empty target set");
  std::visit(overloaded{
                 [&](const ParentGp& f) {
                   f.model.validate();
                   parent_factor_ = cholesky_lower(cov_matrix(f.model, targets_), f.model.variance,
                                                   "parent GP targets");
                 },
                 [&](const NngpField& f) {
                   conds_ = target_conditionals(f.factor->model, *f.refset, targets_, f.target_rule);
                 },
                 [&](const PcgpField& f) { blocks_ = build_block_conditionals(f.pcgp, targets_); },
                 [&](const MpcgpField& f) { components_ = build_mpcgp_blocks(f.mpcgp, targets_); },
             },
             model_);
}

std::size_t FieldSampler::reference_size() const {
  return std::visit(overloaded{
                        [](const ParentGp&) -> std::size_t { return 0; },
                        [](const NngpField& f) { return f.refset->size(); },
                        [](const PcgpField& f) { return f.pcgp.refset->size(); },
                        [](const MpcgpField& f) { return f.mpcgp.components.front().refset->size(); },
                    },
                    model_);
}

Vector FieldSampler::simulate_reference(StreamKey key) const {
  return std::visit(overloaded{
                        [](const ParentGp&) -> Vector {
                          throw PreconditionError("parent GP has no reference set");
                        },
                        [&](const NngpField& f) { return sparsefield::simulate_reference(*f.factor, key); },
                        [&](const PcgpField& f) { return sparsefield::simulate_reference(*f.pcgp.factor, key); },
                        [&](const MpcgpField& f) {
                          return sparsefield::simulate_reference(*f.mpcgp.components.front().factor, key);
                        },
                    },
                    model_);
}

void FieldSampler::simulate(StreamKey key, std::span<double> out) const {
  if (out.size() != targets_.size()) throw PreconditionError("FieldSampler: output size mismatch");
  if (const auto* parent = std::get_if<ParentGp>(&model_)) {
    RandomStream stream(key.child(1));
    const Vector mean = Vector::Constant(static_cast<Eigen::Index>(targets_.size()), parent->model.mean);
    const Vector z = mvn_sample(mean, parent_factor_, stream);
    std::copy(z.data(), z.data() + z.size(), out.begin());
    return;
  }
  const Vector z_ref = simulate_reference(key.child(0));
  simulate_given(std::span<const double>(z_ref.data(), static_cast<std::size_t>(z_ref.size())),
                 key.child(1), out);
}

void FieldSampler::simulate_given(std::span<const double> z_ref, StreamKey key,
                                  std::span<double> out) const {
  if (out.size() != targets_.size()) throw PreconditionError("FieldSampler: output size mismatch");
  if (z_ref.size() != reference_size() || !has_reference()) {
    throw PreconditionError("FieldSampler: reference vector does not match the model");
  }
  std::visit(overloaded{
                 [](const ParentGp&) {},
                 [&](const NngpField&) { simulate_targets_into(conds_, z_ref, key, out); },
                 [&](const PcgpField&) { simulate_blocks_into(blocks_, z_ref, key, out); },
                 [&](const MpcgpField&) { simulate_mpcgp_into(components_, z_ref, key, out); },
             },
             model_);
}

Vector FieldSampler::conditional_mean(std::span<const double> z_ref) const {
  if (z_ref.size() != reference_size() || !has_reference()) {
    throw PreconditionError("FieldSampler: reference vector does not match the model");
  }
  Vector out = Vector::Zero(static_cast<Eigen::Index>(targets_.size()));
  auto add_blocks = [&](const BlockList& blocks, double weight) {
    for (const auto& b : blocks) {
      const Vector m = b.conditional_mean(z_ref);
      for (std::size_t i = 0; i < b.members.size(); ++i) out[static_cast<Eigen::Index>(b.members[i])] += weight * m[static_cast<Eigen::Index>(i)];
    }
  };
  std::visit(overloaded{
                 [](const ParentGp&) {},
                 [&](const NngpField&) {
                   for (std::size_t i = 0; i < conds_.size(); ++i) {
                     out[static_cast<Eigen::Index>(i)] = conds_[i].conditional_mean(z_ref);
                   }
                 },
                 [&](const PcgpField&) { add_blocks(blocks_, 1.0); },
                 [&](const MpcgpField&) {
                   for (const auto& c : components_) add_blocks(c, 1.0 / static_cast<double>(components_.size()));
                 },
             },
             model_);
  return out;
}

double FieldSampler::conditional_variance_of_mean() const {
  const auto m = static_cast<double>(targets_.size());
  const double total = std::visit(
      overloaded{
          [&](const ParentGp&) {
            const Matrix c = parent_factor_ * parent_factor_.transpose();
            return c.sum();
          },
          [&](const NngpField&) {
            double s = 0.0;
            for (const auto& c : conds_) s += c.sd * c.sd;
            return s;
          },
          [&](const PcgpField&) { return block_sum(blocks_); },
          [&](const MpcgpField&) {
            double s = 0.0;
            for (const auto& c : components_) s += block_sum(c);
            return s / static_cast<double>(components_.size());
          },
      },
      model_);
  return total / (m * m);
}

Matrix FieldSampler::implied_covariance() const {
  return sparsefield::implied_covariance(model_, targets_);
}

const TargetConditionals* FieldSampler::nngp_conditionals() const {
  return std::holds_alternative<NngpField>(model_) ? &conds_ : nullptr;
}

// ---------------------------------------------------------------------------

Matrix implied_covariance(const FieldModel& model, std::span<const Location> targets) {
  return std::visit(
      overloaded{
          [&](const ParentGp& f) { return cov_matrix(f.model, targets); },
          [&](const NngpField& f) {
            return implied_covariance_nngp(*f.factor,
                                           target_conditionals(f.factor->model, *f.refset, targets, f.target_rule));
          },
          [&](const PcgpField& f) { return implied_covariance_pcgp(f.pcgp, targets); },
          [&](const MpcgpField& f) { return implied_covariance_mpcgp(f.mpcgp, targets); },
      },
      model);
}

std::unique_ptr<GaussianStructure> make_structure(const FieldModel& model,
                                                  std::span<const Location> targets) {
  return std::visit(
      overloaded{
          [&](const ParentGp& f) -> std::unique_ptr<GaussianStructure> {
            return std::make_unique<DenseStructure>(cov_matrix(f.model.standardized(), targets), "GP");
          },
          [&](const NngpField& f) -> std::unique_ptr<GaussianStructure> {
            const auto& ref = f.refset->locations;
            if (targets.size() == ref.size() && std::equal(targets.begin(), targets.end(), ref.begin())) {
              return std::make_unique<NngpStructure>(std::make_shared<const SparseFactor>(unit_factor(*f.factor)));
            }
            const Matrix omega = implied_covariance(model, targets) / f.factor->model.variance;
            return std::make_unique<DenseStructure>(omega, model_tag(model));
          },
          [&](const PcgpField& f) -> std::unique_ptr<GaussianStructure> {
            return std::make_unique<PcgpStructure>(unit_pcgp(f.pcgp), targets);
          },
          [&](const MpcgpField& f) -> std::unique_ptr<GaussianStructure> {
            const Matrix omega =
                implied_covariance_mpcgp(f.mpcgp, targets) / f.mpcgp.components.front().model.variance;
            return std::make_unique<DenseStructure>(omega, "mPCGP");
          },
      },
      model);
}

double log_likelihood(const FieldModel& model, std::span<const Location> targets,
                      std::span<const double> data) {
  const auto& cm = covariance_model(model);
  return make_structure(model, targets)->log_likelihood(data, cm.mean, cm.variance);
}

std::vector<DivergenceLevel> divergence_probe(const FieldModel& model, const GridSchedule& coarsest,
                                              int levels, std::size_t replications, StreamKey key,
                                              std::span<const double> z_ref) {
  GridSchedule finest = coarsest;
  for (int l = 1; l < levels; ++l) finest = refine(finest);
  const FieldSampler sampler(model, finest.locations());
  const std::vector<double> fixed(z_ref.begin(), z_ref.end());
  return divergence_probe(coarsest, levels, replications,
                          [&](const LocationList&, std::size_t rep, std::span<double> out) {
                            if (fixed.empty()) {
                              sampler.simulate(key.child(rep), out);
                            } else {
                              sampler.simulate_given(fixed, key.child(rep), out);
                            }
                          });
}

}  // namespace sparsefield
