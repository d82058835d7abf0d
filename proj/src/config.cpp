#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sparsefield/experiments.hpp"

namespace sparsefield {

namespace {

const std::vector<std::string> kExperiments{"bb", "field", "mle", "mpcgp-compare", "theorem-probe"};

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  std::vector<T> out;
  std::string token;
  while (in >> token) {
    std::istringstream one(token);
    T v{};
    if (!(one >> v) || !one.eof()) throw ConfigError("config: bad value '" + token + "' in " + key);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("config: empty list for " + key);
  return out;
}

template <typename T>
T parse_one(const std::string& key, const std::string& text) {
  const auto v = parse_list<T>(key, text);
  if (v.size() != 1) throw ConfigError("config: expected one value for " + key);
  return v.front();
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config: bad boolean '" + text + "' for " + key);
}

template <typename T>
bool ascending(const std::vector<T>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](T a, T b) { return !(a < b); }) == v.end();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

}  // namespace

Domain ExperimentConfig::domain() const {
  Location lo, hi;
  lo.dim = hi.dim = static_cast<int>(domain_lower.size());
  for (std::size_t a = 0; a < domain_lower.size(); ++a) {
    lo[static_cast<int>(a)] = domain_lower[a];
    hi[static_cast<int>(a)] = domain_upper[a];
  }
  return Domain(lo, hi);
}

CovarianceModel ExperimentConfig::covariance() const {
  CovarianceModel m;
  m.mean = mean;
  m.variance = variance;
  if (family == "brownian_bridge") {
    m.family = BrownianBridge{};
  } else {
    m.family = PoweredExponential::from_phi_pow_nu(phi_pow_nu, nu);
  }
  return m;
}

NeighborRule ExperimentConfig::rule() const {
  if (neighbor_rule == "radius") return Radius{radius};
  if (neighbor_rule == "full") return Full{};
  return NearestM{neighbors};
}

OrderingRule ExperimentConfig::ordering_rule() const {
  if (ordering == "random") return OrderingRule::kRandom;
  if (ordering == "given") return OrderingRule::kAsGiven;
  return OrderingRule::kSortedCoordinate;
}

void ExperimentConfig::validate() const {
  require(std::find(kExperiments.begin(), kExperiments.end(), experiment) != kExperiments.end(),
          "unknown experiment '" + experiment + "'");
  require(replications >= 2, "replications must be >= 2");
  require(!domain_lower.empty() && domain_lower.size() == domain_upper.size() &&
              domain_lower.size() <= static_cast<std::size_t>(kMaxDim),
          "domain lower/upper must have the same dimension (1-3)");
  for (std::size_t a = 0; a < domain_lower.size(); ++a) {
    require(domain_lower[a] < domain_upper[a], "domain lower must be below upper");
  }
  require(family == "powered_exponential" || family == "brownian_bridge",
          "family must be powered_exponential or brownian_bridge");
  require(variance > 0.0 && std::isfinite(mean), "variance must be positive");
  if (family == "powered_exponential") {
    require(nu > 0.0 && nu <= 2.0 && phi_pow_nu > 0.0, "need 0 < nu <= 2 and phi_pow_nu > 0");
  } else {
    require(domain_lower.size() == 1 && domain_lower[0] == 0.0 && domain_upper[0] == 1.0,
            "brownian_bridge needs the domain [0, 1]");
    require(variance == 1.0 && mean == 0.0, "brownian_bridge has mean 0 and variance 1");
  }
  require(reference_size >= 1, "reference size must be positive");
  require(reference_layout == "uniform" || reference_layout == "grid", "layout must be uniform or grid");
  require(neighbor_rule == "nearest" || neighbor_rule == "radius" || neighbor_rule == "full",
          "rule must be nearest, radius or full");
  require(neighbors >= 1 && radius > 0.0, "neighbors and radius must be positive");
  require(ordering == "sorted" || ordering == "random" || ordering == "given",
          "ordering must be sorted, random or given");
  require(cells.size() == domain_lower.size(), "pcgp cells need one count per axis");
  for (int c : cells) require(c >= 1, "pcgp cells must be positive");
  require(region_neighbors >= 1 && components >= 1, "region_neighbors and components must be positive");
  require(!grid_sizes.empty() && ascending(grid_sizes) && grid_sizes.front() >= 1,
          "grid sizes must be positive and ascending");
  require(!levels.empty() && ascending(levels) && levels.front() >= 0 && levels.back() <= 24,
          "levels must be ascending in [0, 24]");
  require(pcgp_max_level >= 0, "pcgp_max_level must be >= 0");
  require(schedule_base >= 1 && schedule_levels >= 1, "schedule base and levels must be positive");
  require(!mle_sizes.empty() && ascending(mle_sizes) && mle_sizes.front() >= 2,
          "mle sizes must be ascending and >= 2");
  require(generator_neighbors >= 1 && mle_neighbors >= 1 && pcgp_reference_size >= 1,
          "mle neighbor counts must be positive");
  require(mle_cells.size() == domain_lower.size(), "mle cells need one count per axis");
  for (int c : mle_cells) require(c >= 1, "mle cells must be positive");
}

std::uint64_t ExperimentConfig::require_seed() const {
  if (!seed) throw ConfigError("config: no seed given (set experiment.seed or --seed)");
  return *seed;
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "bb") {
    c.domain_lower = {0.0};
    c.domain_upper = {1.0};
    c.family = "brownian_bridge";
    c.reference_size = 5;
    c.reference_layout = "grid";
    c.neighbors = 2;
    c.cells = {6};
    c.region_neighbors = 2;
    c.components = 1;
    c.levels = {3, 9, 14};
    c.replications = 10000;
    c.mle_cells = {1};
  } else if (experiment == "theorem-probe") {
    c.schedule_base = 32;
    c.schedule_levels = 5;
    c.replications = 400;
  } else if (experiment == "mle") {
    c.replications = 30;
  } else if (experiment == "mpcgp-compare") {
    c.grid_sizes = {100};
    c.replications = 100;
  }
  return c;
}

ExperimentConfig parse_config(const std::string& ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto experiment = tree.get_optional<std::string>("experiment.name");
  if (!experiment) throw ConfigError("config: missing experiment.name");
  ExperimentConfig c = default_config(*experiment);

  for (const auto& [section, body] : tree) {
    for (const auto& [name, node] : body) {
      const std::string key = section + "." + name;
      const std::string v = node.get_value<std::string>();
      if (key == "experiment.name") {
      } else if (key == "experiment.seed") {
        c.seed = parse_one<std::uint64_t>(key, v);
      } else if (key == "experiment.replications") {
        c.replications = parse_one<std::size_t>(key, v);
      } else if (key == "experiment.output") {
        c.output_dir = v;
      } else if (key == "domain.lower") {
        c.domain_lower = parse_list<double>(key, v);
      } else if (key == "domain.upper") {
        c.domain_upper = parse_list<double>(key, v);
      } else if (key == "covariance.family") {
        c.family = v;
      } else if (key == "covariance.mean") {
        c.mean = parse_one<double>(key, v);
      } else if (key == "covariance.variance") {
        c.variance = parse_one<double>(key, v);
      } else if (key == "covariance.nu") {
        c.nu = parse_one<double>(key, v);
      } else if (key == "covariance.phi_pow_nu") {
        c.phi_pow_nu = parse_one<double>(key, v);
      } else if (key == "covariance.phi") {
        c.phi_pow_nu = std::pow(parse_one<double>(key, v), c.nu);
      } else if (key == "reference.size") {
        c.reference_size = parse_one<std::size_t>(key, v);
      } else if (key == "reference.layout") {
        c.reference_layout = v;
      } else if (key == "reference.rule") {
        c.neighbor_rule = v;
      } else if (key == "reference.neighbors") {
        c.neighbors = parse_one<int>(key, v);
      } else if (key == "reference.radius") {
        c.radius = parse_one<double>(key, v);
      } else if (key == "reference.ordering") {
        c.ordering = v;
      } else if (key == "pcgp.cells") {
        c.cells = parse_list<int>(key, v);
      } else if (key == "pcgp.region_neighbors") {
        c.region_neighbors = parse_one<int>(key, v);
      } else if (key == "pcgp.components") {
        c.components = parse_one<int>(key, v);
      } else if (key == "pcgp.max_level") {
        c.pcgp_max_level = parse_one<int>(key, v);
      } else if (key == "grids.sizes") {
        c.grid_sizes = parse_list<int>(key, v);
      } else if (key == "grids.levels") {
        c.levels = parse_list<int>(key, v);
      } else if (key == "grids.schedule_base") {
        c.schedule_base = parse_one<int>(key, v);
      } else if (key == "grids.schedule_levels") {
        c.schedule_levels = parse_one<int>(key, v);
      } else if (key == "mle.sizes") {
        c.mle_sizes = parse_list<std::size_t>(key, v);
      } else if (key == "mle.generator_neighbors") {
        c.generator_neighbors = parse_one<int>(key, v);
      } else if (key == "mle.reference_size") {
        c.pcgp_reference_size = parse_one<std::size_t>(key, v);
      } else if (key == "mle.cells") {
        c.mle_cells = parse_list<int>(key, v);
      } else if (key == "mle.neighbors") {
        c.mle_neighbors = parse_one<int>(key, v);
      } else if (key == "mle.crosscheck") {
        c.crosscheck = parse_bool(key, v);
      } else {
        throw ConfigError("config: unknown key " + key);
      }
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

ExperimentConfig apply_scale(ExperimentConfig c, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ConfigError("--scale must be positive");
  c.replications = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(c.replications * factor)));
  if (factor >= 1.0) return c;

  const int dim = static_cast<int>(c.domain_lower.size());
  const auto points = [dim](double side) { return std::pow(side, dim); };
  const auto cap = static_cast<double>(kScaledGridCap);

  std::vector<int> sizes;
  const int max_side = static_cast<int>(std::floor(std::pow(cap, 1.0 / dim) + 1e-9));
  for (int g : c.grid_sizes) {
    const int capped = std::min(g, max_side);
    if (sizes.empty() || sizes.back() < capped) sizes.push_back(capped);
  }
  c.grid_sizes = sizes;

  std::vector<int> levels;
  for (int n : c.levels) {
    // bb grids hold 2^n points per gap between reference points
    const double size = c.experiment == "bb" ? std::ldexp(static_cast<double>(c.reference_size + 1), n)
                                             : points(std::ldexp(1.0, n));
    if (size <= cap) levels.push_back(n);
  }
  if (levels.empty()) levels.push_back(0);
  c.levels = levels;

  while (c.schedule_levels > 1 && points(std::ldexp(c.schedule_base, c.schedule_levels - 1) + 1) > cap) {
    --c.schedule_levels;
  }
  while (c.schedule_base > 1 && points(c.schedule_base + 1) > cap) c.schedule_base /= 2;

  std::vector<std::size_t> mle;
  for (auto n : c.mle_sizes) {
    const auto capped = std::min(n, kScaledGridCap);
    if (mle.empty() || mle.back() < capped) mle.push_back(capped);
  }
  c.mle_sizes = mle;
  return c;
}

}  // namespace sparsefield
