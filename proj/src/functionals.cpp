#include "sparsefield/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sparsefield/parallel.hpp"

namespace sparsefield {

double h1(const Domain& domain, std::span<const double> values) {
  if (values.empty()) throw PreconditionError("h1: empty value list");
  double s = 0.0;
  for (double v : values) s += v;
  return volume(domain) * s / static_cast<double>(values.size());
}

double h2(std::span<const double> values, const Interval& interval) {
  if (!(interval.lower < interval.upper)) throw PreconditionError("h2: empty interval");
  if (values.empty()) throw PreconditionError("h2: empty value list");
  std::size_t inside = 0;
  for (double v : values) inside += interval.contains(v) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(values.size());
}

Extremes h3(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("h3: empty value list");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {*lo, *hi};
}

FunctionalResult evaluate_functionals(const Domain& domain, std::span<const double> values,
                                      std::span<const Interval> intervals) {
  FunctionalResult r;
  r.integral = h1(domain, values);
  for (const auto& a : intervals) r.level_fractions.push_back(h2(values, a));
  r.extremes = h3(values);
  r.grid_size = values.size();
  return r;
}

std::vector<double> partial_sum_limit_coeffs(const TargetConditionals& conds,
                                             std::size_t reference_size) {
  if (conds.empty()) throw PreconditionError("partial_sum_limit_coeffs: no targets");
  bool any_neighbor = false;
  for (const auto& c : conds) any_neighbor = any_neighbor || !c.neighbors.empty();
  if (!any_neighbor || reference_size == 0) {
    throw PreconditionError("partial_sum_limit_coeffs: targets do not condition on the reference set");
  }
  std::vector<double> c(reference_size, 0.0);
  for (const auto& t : conds) {
    for (std::size_t k = 0; k < t.neighbors.size(); ++k) {
      c[static_cast<std::size_t>(t.neighbors[k])] += t.coeffs[static_cast<Eigen::Index>(k)];
    }
  }
  for (auto& v : c) v /= static_cast<double>(conds.size());
  return c;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double mu_g_indicator(double mu, double sigma, const Interval& interval) {
  if (!(sigma > 0.0)) throw PreconditionError("mu_g_indicator: sigma must be positive");
  const double hi = std::isinf(interval.upper) ? (interval.upper > 0 ? 1.0 : 0.0)
                                               : normal_cdf((interval.upper - mu) / sigma);
  const double lo = std::isinf(interval.lower) ? (interval.lower > 0 ? 1.0 : 0.0)
                                               : normal_cdf((interval.lower - mu) / sigma);
  return hi - lo;
}

double BrownianBridgeLaws::max_density(double x) {
  return x <= 0.0 ? 0.0 : 4.0 * x * std::exp(-2.0 * x * x);
}

double BrownianBridgeLaws::integral_density(double x) {
  const double var = 1.0 / 12.0;
  return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

BrownianBridgeLaws bb_exact_laws() {
  return {0.0, 1.0 / 12.0, std::sqrt(std::numbers::pi / 8.0), (4.0 - std::numbers::pi) / 8.0};
}

double sample_variance(std::span<const double> samples) {
  const auto n = samples.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(n - 1);
}

namespace {

template <typename Stat>
std::vector<double> batch_statistics(std::span<const double> samples, Stat stat) {
  const std::size_t n = samples.size();
  std::vector<double> out;
  for (int b = 0; b < kMcBatches; ++b) {
    const std::size_t lo = n * static_cast<std::size_t>(b) / kMcBatches;
    const std::size_t hi = n * static_cast<std::size_t>(b + 1) / kMcBatches;
    out.push_back(stat(samples.subspan(lo, hi - lo)));
  }
  return out;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

McSummary summarize(std::span<const double> samples) {
  McSummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  s.mean = mean_of(samples);
  s.sd = std::sqrt(sample_variance(samples));
  if (samples.size() >= static_cast<std::size_t>(2 * kMcBatches)) {
    const auto means = batch_statistics(samples, mean_of);
    s.se = std::sqrt(sample_variance(means) / kMcBatches);
  } else {
    s.se = s.sd / std::sqrt(static_cast<double>(samples.size()));
  }
  return s;
}

McSummary summarize_variance(std::span<const double> samples) {
  McSummary s;
  s.count = samples.size();
  s.mean = sample_variance(samples);
  s.sd = std::sqrt(s.mean);
  if (samples.size() >= static_cast<std::size_t>(2 * kMcBatches)) {
    const auto vars = batch_statistics(samples, [](std::span<const double> b) { return sample_variance(b); });
    s.se = std::sqrt(sample_variance(vars) / kMcBatches);
  } else {
    // Normal-theory fallback: Var(s^2) = 2 sigma^4 / (n - 1).
    s.se = samples.size() > 1 ? s.mean * std::sqrt(2.0 / static_cast<double>(samples.size() - 1)) : 0.0;
  }
  return s;
}

double grid_edge_jump(std::span<const Location> grid, std::span<const int> counts,
                      std::span<const double> values, const Partition& partition, bool across) {
  if (counts.size() != 2) throw PreconditionError("grid_edge_jump: 2-D grid required");
  const auto nx = static_cast<std::size_t>(counts[0]);
  const auto ny = static_cast<std::size_t>(counts[1]);
  if (grid.size() != nx * ny || values.size() != grid.size()) {
    throw PreconditionError("grid_edge_jump: grid/value size mismatch");
  }
  std::vector<std::size_t> cell(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) cell[i] = locate_cell(partition, grid[i]);
  double total = 0.0;
  std::size_t pairs = 0;
  auto visit = [&](std::size_t a, std::size_t b) {
    if ((cell[a] != cell[b]) == across) {
      total += std::abs(values[a] - values[b]);
      ++pairs;
    }
  };
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) {
      const std::size_t i = y * nx + x;
      if (x + 1 < nx) visit(i, i + 1);
      if (y + 1 < ny) visit(i, i + nx);
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

std::vector<DivergenceLevel> divergence_probe(
    const GridSchedule& coarsest, int levels, std::size_t replications,
    const std::function<void(const LocationList&, std::size_t, std::span<double>)>& simulate) {
  if (levels < 1 || replications < 2) throw PreconditionError("divergence_probe: need >= 1 level and >= 2 reps");
  std::vector<GridSchedule> schedule{coarsest};
  for (int l = 1; l < levels; ++l) schedule.push_back(refine(schedule.back()));

  // subset[l] holds the positions of level-l points inside the finest grid.
  std::vector<std::vector<std::size_t>> subset(levels);
  subset[levels - 1].resize(schedule.back().size());
  for (std::size_t i = 0; i < subset[levels - 1].size(); ++i) subset[levels - 1][i] = i;
  for (int l = levels - 2; l >= 0; --l) {
    const auto up = schedule[l].indices_in_refined();
    subset[l].resize(up.size());
    for (std::size_t i = 0; i < up.size(); ++i) subset[l][i] = subset[l + 1][up[i]];
  }

  const LocationList finest = schedule.back().locations();
  std::vector<std::vector<double>> mins(levels, std::vector<double>(replications));
  std::vector<std::vector<double>> maxs(levels, std::vector<double>(replications));
  parallel_for(static_cast<std::ptrdiff_t>(replications), [&](std::ptrdiff_t rep) {
    std::vector<double> values(finest.size());
    simulate(finest, static_cast<std::size_t>(rep), values);
    for (int l = 0; l < levels; ++l) {
      double lo = values[subset[l][0]];
      double hi = lo;
      for (auto i : subset[l]) {
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
      }
      mins[l][rep] = lo;
      maxs[l][rep] = hi;
    }
  });

  std::vector<DivergenceLevel> out;
  for (int l = 0; l < levels; ++l) {
    out.push_back({schedule[l].level, schedule[l].size(), summarize(mins[l]), summarize(maxs[l])});
  }
  return out;
}

}  // namespace sparsefield
