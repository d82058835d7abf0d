#include <algorithm>
#include <cmath>
#include <memory>

#include "sparsefield/experiments.hpp"
#include "sparsefield/parallel.hpp"

namespace sparsefield {

namespace {

// Top-level substreams, one per experiment tag.
constexpr std::uint64_t kBbStream = 1;
constexpr std::uint64_t kFieldStream = 2;
constexpr std::uint64_t kProbeStream = 3;
constexpr std::uint64_t kMleStream = 4;
constexpr std::uint64_t kMpcgpStream = 5;

const char* const kAxisNames[kMaxDim] = {"x", "y", "z"};

ResultRow row_of(const std::string& model, std::size_t m, const std::string& stat, const McSummary& s) {
  return {model, m, stat, s.mean, s.sd, s.se, s.count};
}

ResultRow exact_row(const std::string& model, std::size_t m, const std::string& stat, double value) {
  return {model, m, stat, value, 0.0, 0.0, 0};
}

std::vector<std::string> location_header(int dim, const std::string& last) {
  std::vector<std::string> h;
  for (int a = 0; a < dim; ++a) h.push_back(kAxisNames[a]);
  h.push_back(last);
  return h;
}

Table location_table(std::string name, std::span<const Location> locs, std::span<const double> values,
                     const std::string& column) {
  const int dim = locs.empty() ? 1 : locs.front().dim;
  Table t{std::move(name), location_header(dim, column), {}};
  for (std::size_t i = 0; i < locs.size(); ++i) {
    std::vector<std::string> r;
    for (int a = 0; a < dim; ++a) r.push_back(format_number(locs[i][a]));
    r.push_back(format_number(values[i]));
    t.add(std::move(r));
  }
  return t;
}

LocationList reference_locations(const ExperimentConfig& c, StreamKey key) {
  const Domain d = c.domain();
  if (c.reference_layout == "uniform") return uniform_locations(d, c.reference_size, key);
  if (d.dim() == 1) {
    // interior points of an even split of the interval
    LocationList out;
    const double h = (d.upper[0] - d.lower[0]) / static_cast<double>(c.reference_size + 1);
    for (std::size_t j = 1; j <= c.reference_size; ++j) out.push_back({d.lower[0] + h * static_cast<double>(j)});
    return out;
  }
  const int side = static_cast<int>(std::llround(std::pow(static_cast<double>(c.reference_size), 1.0 / d.dim())));
  if (std::llround(std::pow(side, d.dim())) != static_cast<long long>(c.reference_size)) {
    throw ConfigError("config: grid layout needs a perfect-power reference size");
  }
  const std::vector<int> counts(static_cast<std::size_t>(d.dim()), side);
  return regular_grid(d, counts, GridStyle::kCellCentered);
}

std::vector<int> axis_counts(const ExperimentConfig& c, int per_axis) {
  return std::vector<int>(c.domain_lower.size(), per_axis);
}

struct FieldSetup {
  Domain domain;
  NngpField nngp;
  PcgpField pcgp;
  std::vector<double> z;
};

FieldSetup make_setup(const ExperimentConfig& c, StreamKey root) {
  const Domain d = c.domain();
  auto nngp = make_nngp_field(c.covariance(), reference_locations(c, root.child(0)), c.rule(), c.ordering_rule());
  auto pcgp = make_pcgp_field(nngp, make_partition(d, c.cells), c.region_neighbors);
  const Vector z = simulate_reference(*nngp.factor, root.child(1));
  return {d, std::move(nngp), std::move(pcgp), std::vector<double>(z.data(), z.data() + z.size())};
}

Table reference_table(std::string name, const FieldSetup& s) {
  return location_table(std::move(name), s.nngp.refset->locations, s.z, "value");
}

void add_summary_pair(ExperimentReport& report, const std::string& model, std::size_t m,
                      const std::string& stat, const std::vector<double>& values) {
  report.add_row(row_of(model, m, stat, summarize(values)));
  report.add_row(row_of(model, m, stat + "_variance", summarize_variance(values)));
}

// 2^n equally spaced points strictly inside each gap between consecutive
// reference points (domain ends included as gap boundaries).
LocationList bb_grid(const Domain& d, const ReferenceSet& refs, int n) {
  std::vector<double> knots{d.lower[0]};
  for (const auto& u : refs.locations) knots.push_back(u[0]);
  knots.push_back(d.upper[0]);
  std::sort(knots.begin(), knots.end());
  const int per = 1 << n;
  LocationList out;
  out.reserve((knots.size() - 1) * static_cast<std::size_t>(per));
  for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
    const double h = (knots[j + 1] - knots[j]) / (per + 1);
    for (int k = 1; k <= per; ++k) out.push_back({knots[j] + h * k});
  }
  return out;
}

}  // namespace

ExperimentReport run_bb(const ExperimentConfig& c) {
  c.validate();
  if (c.domain_lower.size() != 1) throw ConfigError("config: bb needs a 1-D domain");
  const StreamKey root = StreamKey(c.require_seed()).child(kBbStream);
  const Domain d = c.domain();
  const auto nngp = make_nngp_field(c.covariance(), reference_locations(c, root.child(0)), c.rule(),
                                    c.ordering_rule());
  const auto pcgp = make_pcgp_field(nngp, make_partition(d, c.cells), c.region_neighbors);

  ExperimentReport report{"bb", {}, {}};
  const std::size_t reps = c.replications;
  const std::vector<FieldModel> models{nngp, pcgp};
  for (int n : c.levels) {
    const LocationList grid = bb_grid(d, *nngp.refset, n);
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      if (mi == 1 && n > c.pcgp_max_level) continue;
      const std::string tag = model_tag(models[mi]);
      const FieldSampler sampler(models[mi], grid);
      // same key for both models: replication r shares its Z_S draw
      const StreamKey key = root.child(1).child(static_cast<std::uint64_t>(n));
      std::vector<double> integral(reps), maxima(reps);
      parallel_for(static_cast<std::ptrdiff_t>(reps), [&](std::ptrdiff_t r) {
        std::vector<double> v(grid.size());
        sampler.simulate(key.child(static_cast<std::uint64_t>(r)), v);
        integral[r] = h1(d, v);
        maxima[r] = h3(v).max;
      });
      add_summary_pair(report, tag, grid.size(), "integral", integral);
      add_summary_pair(report, tag, grid.size(), "max", maxima);
      const std::string suffix = tag + "_n" + std::to_string(n);
      report.tables.push_back(histogram_table("hist_integral_" + suffix + ".csv", integral, -1.2, 1.2));
      report.tables.push_back(histogram_table("hist_max_" + suffix + ".csv", maxima, 0.0, 2.4));
    }
  }

  if (c.family == "brownian_bridge") {
    const auto laws = bb_exact_laws();
    report.add_row(exact_row("exact", 0, "integral", laws.integral_mean));
    report.add_row(exact_row("exact", 0, "integral_variance", laws.integral_variance));
    report.add_row(exact_row("exact", 0, "max", laws.max_mean));
    report.add_row(exact_row("exact", 0, "max_variance", laws.max_variance));
    Table dens{"bb_exact_density.csv", {"integral_x", "integral_density", "max_x", "max_density"}, {}};
    for (int i = 0; i <= 240; ++i) {
      const double xi = -1.2 + 0.01 * i;
      const double xm = 0.01 * i;
      dens.add({format_number(xi), format_number(BrownianBridgeLaws::integral_density(xi)), format_number(xm),
                format_number(BrownianBridgeLaws::max_density(xm))});
    }
    report.tables.push_back(std::move(dens));
  }
  return report;
}

ExperimentReport run_field(const ExperimentConfig& c) {
  c.validate();
  const StreamKey root = StreamKey(c.require_seed()).child(kFieldStream);
  const FieldSetup s = make_setup(c, root);
  const std::array<Interval, 3> sets{kIntervalA1, kIntervalA2, kIntervalA3};
  const std::size_t reps = c.replications;

  ExperimentReport report{"field", {}, {}};
  report.tables.push_back(reference_table("reference.csv", s));
  const std::vector<FieldModel> models{s.nngp, s.pcgp};
  for (std::size_t gi = 0; gi < c.grid_sizes.size(); ++gi) {
    const auto counts = axis_counts(c, c.grid_sizes[gi]);
    const LocationList grid = regular_grid(s.domain, counts, GridStyle::kCellCentered);
    const bool finest = gi + 1 == c.grid_sizes.size();
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      const std::string tag = model_tag(models[mi]);
      const FieldSampler sampler(models[mi], grid);
      const StreamKey key = root.child(2).child(mi).child(gi);
      std::vector<std::vector<double>> stats(6, std::vector<double>(reps));
      parallel_for(static_cast<std::ptrdiff_t>(reps), [&](std::ptrdiff_t r) {
        std::vector<double> v(grid.size());
        sampler.simulate_given(s.z, key.child(static_cast<std::uint64_t>(r)), v);
        const auto f = evaluate_functionals(s.domain, v, sets);
        stats[0][r] = f.integral;
        for (int a = 0; a < 3; ++a) stats[1 + a][r] = f.level_fractions[a];
        stats[4][r] = f.extremes.min;
        stats[5][r] = f.extremes.max;
      });
      const char* names[6] = {"h1", "h2_A1", "h2_A2", "h2_A3", "h3_min", "h3_max"};
      for (int k = 0; k < 6; ++k) report.add_row(row_of(tag, grid.size(), names[k], summarize(stats[k])));
      if (finest) {
        std::vector<double> v(grid.size());
        sampler.simulate_given(s.z, key.child(0), v);
        report.tables.push_back(location_table("heatmap_" + tag + ".csv", grid, v, "value"));
      }
    }
  }
  return report;
}

ExperimentReport run_theorem_probe(const ExperimentConfig& c) {
  c.validate();
  const StreamKey root = StreamKey(c.require_seed()).child(kProbeStream);
  const FieldSetup s = make_setup(c, root);
  const std::size_t reps = c.replications;
  const double vol = volume(s.domain);

  ExperimentReport report{"theorem-probe", {}, {}};
  const std::vector<FieldModel> models{s.nngp, s.pcgp};

  // extremes over a nested schedule, conditional on z_S
  const GridSchedule coarsest{s.domain, axis_counts(c, c.schedule_base), 0};
  Table div{"divergence.csv", {"model", "level", "M", "min_mean", "min_mc_se", "max_mean", "max_mc_se"}, {}};
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const std::string tag = model_tag(models[mi]);
    const auto levels = divergence_probe(models[mi], coarsest, c.schedule_levels, reps, root.child(2).child(mi), s.z);
    for (const auto& l : levels) {
      report.add_row(row_of(tag, l.grid_size, "max", l.max));
      report.add_row(row_of(tag, l.grid_size, "min", l.min));
      div.add({tag, std::to_string(l.level), format_number(l.grid_size), format_number(l.min.mean),
               format_number(l.min.se), format_number(l.max.mean), format_number(l.max.se)});
    }
  }
  report.tables.push_back(std::move(div));

  // Var(h1 | z_S): analytic against empirical
  Table cv{"conditional_variance.csv", {"model", "M", "analytic", "empirical", "empirical_mc_se"}, {}};
  for (std::size_t gi = 0; gi < c.grid_sizes.size(); ++gi) {
    const LocationList grid = regular_grid(s.domain, axis_counts(c, c.grid_sizes[gi]), GridStyle::kCellCentered);
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      const std::string tag = model_tag(models[mi]);
      const FieldSampler sampler(models[mi], grid);
      const StreamKey key = root.child(3).child(mi).child(gi);
      std::vector<double> integral(reps);
      parallel_for(static_cast<std::ptrdiff_t>(reps), [&](std::ptrdiff_t r) {
        std::vector<double> v(grid.size());
        sampler.simulate_given(s.z, key.child(static_cast<std::uint64_t>(r)), v);
        integral[r] = h1(s.domain, v);
      });
      const double analytic = vol * vol * sampler.conditional_variance_of_mean();
      const auto emp = summarize_variance(integral);
      report.add_row(exact_row(tag, grid.size(), "var_h1_analytic", analytic));
      report.add_row(row_of(tag, grid.size(), "var_h1_empirical", emp));
      cv.add({tag, format_number(grid.size()), format_number(analytic), format_number(emp.mean),
              format_number(emp.se)});
    }
  }
  report.tables.push_back(std::move(cv));

  // partial-sum coefficient traces over the same schedule
  Table tr{"coefficient_traces.csv", {"level", "M", "reference_index", "coefficient"}, {}};
  const auto& refset = *s.nngp.refset;
  GridSchedule sched = coarsest;
  std::vector<double> prev;
  for (int l = 0; l < c.schedule_levels; ++l) {
    const auto conds = target_conditionals(s.nngp.factor->model, refset, sched.locations(), s.nngp.target_rule);
    const auto coeffs = partial_sum_limit_coeffs(conds, refset.size());
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
      tr.add({std::to_string(l), format_number(sched.size()), format_number(j), format_number(coeffs[j])});
    }
    if (!prev.empty()) {
      double gap = 0.0;
      for (std::size_t j = 0; j < coeffs.size(); ++j) gap = std::max(gap, std::abs(coeffs[j] - prev[j]));
      report.add_row(exact_row(model_tag(s.nngp), sched.size(), "coeff_gap", gap));
    }
    prev = coeffs;
    sched = refine(sched);
  }
  report.tables.push_back(std::move(tr));
  return report;
}

ExperimentReport run_mle(const ExperimentConfig& c) {
  c.validate();
  const StreamKey root = StreamKey(c.require_seed()).child(kMleStream);
  const Domain d = c.domain();
  const CovarianceModel truth = c.covariance();
  const CovarianceModel unit = truth.standardized();
  const std::size_t n_max = c.mle_sizes.back();
  const std::size_t reps = c.replications;

  // generator: NNGP in arrival order, each point conditioned on its closest
  // previous points; prefixes of a draw are draws on the prefixes
  const LocationList locs = uniform_locations(d, n_max, root.child(0));
  const auto gen_refset = make_reference_set(locs, OrderingRule::kAsGiven, NearestM{c.generator_neighbors});
  const auto gen_factor = build_reference_factor(truth, gen_refset);
  std::vector<Vector> data(reps);
  parallel_for(static_cast<std::ptrdiff_t>(reps), [&](std::ptrdiff_t r) {
    data[r] = simulate_reference(gen_factor, root.child(1).child(static_cast<std::uint64_t>(r)));
  });

  auto pref = std::make_shared<const ReferenceSet>(make_reference_set(
      uniform_locations(d, c.pcgp_reference_size, root.child(2)), OrderingRule::kSortedCoordinate,
      NearestM{c.mle_neighbors}));
  auto pfactor = std::make_shared<const SparseFactor>(build_reference_factor(unit, *pref));
  const Partition partition = make_partition(d, c.mle_cells);

  ExperimentReport report{"mle", {}, {}};
  Table raw{"mle_estimates.csv",
            {"n", "replication", "model", "mu_hat", "mu_se", "sigma2_hat", "sigma2_se", "loglik", "ybar",
             "optimizer_mu", "optimizer_sigma2", "crosscheck_gap"},
            {}};
  for (std::size_t n : c.mle_sizes) {
    const LocationList prefix(locs.begin(), locs.begin() + static_cast<std::ptrdiff_t>(n));
    auto rs = std::make_shared<const ReferenceSet>(
        make_reference_set(prefix, OrderingRule::kSortedCoordinate, NearestM{c.mle_neighbors}));
    const NngpStructure nngp(std::make_shared<const SparseFactor>(build_reference_factor(unit, *rs)));
    const PcgpStructure pcgp(make_pcgp_model(unit, pref, pfactor, partition, c.mle_neighbors), prefix);

    struct Fit {
      MleResult mle;
      std::array<double, 2> opt{0.0, 0.0};
      double gap = 0.0;
    };
    std::vector<std::array<Fit, 2>> fits(reps);
    std::vector<double> ybar(reps);
    parallel_for(static_cast<std::ptrdiff_t>(reps), [&](std::ptrdiff_t r) {
      const std::vector<double> y(data[r].data(), data[r].data() + n);
      std::vector<double> y_ref(n);
      for (std::size_t i = 0; i < n; ++i) y_ref[i] = y[rs->order[i]];
      double acc = 0.0;
      for (double v : y) acc += v;
      ybar[r] = acc / static_cast<double>(n);
      const std::array<const GaussianStructure*, 2> st{&nngp, &pcgp};
      const std::array<const std::vector<double>*, 2> ys{&y_ref, &y};
      for (int k = 0; k < 2; ++k) {
        Fit& f = fits[r][k];
        f.mle = profile_mle(*st[k], *ys[k]);
        if (c.crosscheck) {
          f.opt = optimize_crosscheck(
              [&](double mu, double s2) { return st[k]->log_likelihood(*ys[k], mu, s2); }, ybar[r],
              std::max(sample_variance(*ys[k]), kVarianceFloor));
          f.gap = std::max(std::abs(f.opt[0] - f.mle.mean), std::abs(f.opt[1] - f.mle.variance));
        }
      }
    });

    report.add_row(row_of("data", n, "ybar", summarize(ybar)));
    for (int k = 0; k < 2; ++k) {
      std::vector<double> mu(reps), mu_se(reps), s2(reps), s2_se(reps), dev(reps), gap(reps);
      std::string tag;
      for (std::size_t r = 0; r < reps; ++r) {
        const Fit& f = fits[r][k];
        tag = f.mle.model;
        mu[r] = f.mle.mean;
        mu_se[r] = f.mle.mean_se;
        s2[r] = f.mle.variance;
        s2_se[r] = f.mle.variance_se;
        dev[r] = std::abs(f.mle.mean - ybar[r]);
        gap[r] = f.gap;
        raw.add({format_number(n), format_number(r), tag, format_number(f.mle.mean), format_number(f.mle.mean_se),
                 format_number(f.mle.variance), format_number(f.mle.variance_se), format_number(f.mle.loglik),
                 format_number(ybar[r]), format_number(f.opt[0]), format_number(f.opt[1]), format_number(f.gap)});
      }
      report.add_row(row_of(tag, n, "mu_hat", summarize(mu)));
      report.add_row(row_of(tag, n, "mu_se", summarize(mu_se)));
      report.add_row(row_of(tag, n, "sigma2_hat", summarize(s2)));
      report.add_row(row_of(tag, n, "sigma2_se", summarize(s2_se)));
      report.add_row(row_of(tag, n, "abs_mu_minus_ybar", summarize(dev)));
      if (c.crosscheck) {
        report.add_row(exact_row(tag, n, "crosscheck_gap_max", *std::max_element(gap.begin(), gap.end())));
      }
    }
  }
  report.tables.push_back(std::move(raw));
  return report;
}

ExperimentReport run_mpcgp_compare(const ExperimentConfig& c) {
  c.validate();
  if (c.domain_lower.size() != 2) throw ConfigError("config: mpcgp-compare needs a 2-D domain");
  const StreamKey root = StreamKey(c.require_seed()).child(kMpcgpStream);
  const FieldSetup s = make_setup(c, root);
  const auto mp = make_mpcgp_field(s.pcgp, c.cells, c.components);
  const auto counts = axis_counts(c, c.grid_sizes.back());
  const LocationList grid = regular_grid(s.domain, counts, GridStyle::kCellCentered);
  const std::size_t reps = c.replications;

  ExperimentReport report{"mpcgp-compare", {}, {}};
  const std::vector<FieldModel> models{s.pcgp, mp};
  const StreamKey key = root.child(2);
  for (const auto& fm : models) {
    const std::string tag = model_tag(fm);
    const FieldSampler sampler(fm, grid);
    std::vector<double> across(reps), within(reps), ratio(reps);
    parallel_for(static_cast<std::ptrdiff_t>(reps), [&](std::ptrdiff_t r) {
      std::vector<double> v(grid.size());
      sampler.simulate_given(s.z, key.child(static_cast<std::uint64_t>(r)), v);
      across[r] = grid_edge_jump(grid, counts, v, s.pcgp.pcgp.partition, true);
      within[r] = grid_edge_jump(grid, counts, v, s.pcgp.pcgp.partition, false);
      ratio[r] = across[r] / within[r];
    });
    report.add_row(row_of(tag, grid.size(), "edge_jump_across", summarize(across)));
    report.add_row(row_of(tag, grid.size(), "edge_jump_within", summarize(within)));
    report.add_row(row_of(tag, grid.size(), "edge_jump_ratio", summarize(ratio)));
    std::vector<double> v(grid.size());
    sampler.simulate_given(s.z, key.child(0), v);
    report.tables.push_back(location_table("heatmap_" + tag + ".csv", grid, v, "value"));
    report.tables.push_back(reference_table("reference_" + tag + ".csv", s));
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& c) {
  if (c.experiment == "bb") return run_bb(c);
  if (c.experiment == "field") return run_field(c);
  if (c.experiment == "theorem-probe") return run_theorem_probe(c);
  if (c.experiment == "mle") return run_mle(c);
  if (c.experiment == "mpcgp-compare") return run_mpcgp_compare(c);
  throw ConfigError("config: unknown experiment '" + c.experiment + "'");
}

}  // namespace sparsefield
