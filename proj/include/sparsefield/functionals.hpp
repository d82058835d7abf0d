#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sparsefield/geometry.hpp"
#include "sparsefield/sparse_process.hpp"

namespace sparsefield {

/// Open interval (lower, upper); infinite endpoints allowed.
struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return lower < v && v < upper; }
};

/// Level-set intervals used by the field experiments.
inline constexpr Interval kIntervalA1{0.0, 0.5};
inline constexpr Interval kIntervalA2{1.0, 2.0};
inline constexpr Interval kIntervalA3{-2.5, 0.0};

struct Extremes {
  double min = 0.0;
  double max = 0.0;
};

/// Integral estimate: volume(domain) * mean(values).
double h1(const Domain& domain, std::span<const double> values);
/// Fraction of values strictly inside the interval.
double h2(std::span<const double> values, const Interval& interval);
Extremes h3(std::span<const double> values);

struct FunctionalResult {
  double integral = 0.0;
  std::vector<double> level_fractions;  // one per interval
  Extremes extremes;
  std::size_t grid_size = 0;
  std::size_t replication = 0;
  std::string model;
};

FunctionalResult evaluate_functionals(const Domain& domain, std::span<const double> values,
                                      std::span<const Interval> intervals);

/// c_j = sum_i a_ij / r_n: averaged conditional-mean coefficient of each
/// reference location over a target grid.
std::vector<double> partial_sum_limit_coeffs(const TargetConditionals& conds,
                                             std::size_t reference_size);

/// E[1{mu + sigma W in (a,b)}] = Phi((b-mu)/sigma) - Phi((a-mu)/sigma).
double mu_g_indicator(double mu, double sigma, const Interval& interval);

double normal_cdf(double x);

/// Closed-form laws of the standard Brownian bridge's path functionals.
struct BrownianBridgeLaws {
  double integral_mean = 0.0;
  double integral_variance = 1.0 / 12.0;
  double max_mean;
  double max_variance;

  /// Density of the maximum, 4x exp(-2x^2) for x > 0.
  static double max_density(double x);
  static double integral_density(double x);
};

BrownianBridgeLaws bb_exact_laws();

/// Monte-Carlo summary with a batch-means standard error.
struct McSummary {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

inline constexpr int kMcBatches = 20;

/// Mean, SD and batch-means SE (20 batches; falls back to sd/sqrt(n) below
/// 40 samples).  Sums run in index order.
McSummary summarize(std::span<const double> samples);

/// Sample variance with a batch-means SE for the variance itself.
McSummary summarize_variance(std::span<const double> samples);

double sample_variance(std::span<const double> samples);

/// Mean |Z(u) - Z(v)| over 4-neighbour pairs of a 2-D grid (axis-0 fastest,
/// counts[0] x counts[1]) whose endpoints lie in different partition cells
/// (`across` true) or in the same cell (`across` false).
double grid_edge_jump(std::span<const Location> grid, std::span<const int> counts,
                      std::span<const double> values, const Partition& partition, bool across);

/// Per-level Monte-Carlo mean of (min, max) over a nested schedule.
struct DivergenceLevel {
  int level = 0;
  std::size_t grid_size = 0;
  McSummary min;
  McSummary max;
};

/// Runs `simulate(locations, replication, out)` at the finest schedule level
/// and evaluates the extremes of each coarser level on the nested subset of
/// the same path, so every level sees the same realisation.
std::vector<DivergenceLevel> divergence_probe(
    const GridSchedule& coarsest, int levels, std::size_t replications,
    const std::function<void(const LocationList&, std::size_t, std::span<double>)>& simulate);

}  // namespace sparsefield
