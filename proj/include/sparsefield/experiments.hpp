#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsefield/field_model.hpp"

namespace sparsefield {

inline constexpr const char* kLibraryVersion = "0.3.0";

/// Bad or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string experiment = "field";  // bb | field | mle | mpcgp-compare | theorem-probe
  std::optional<std::uint64_t> seed;
  std::size_t replications = 200;
  std::filesystem::path output_dir = "out";

  std::vector<double> domain_lower{0.0, 0.0};
  std::vector<double> domain_upper{10.0, 10.0};

  std::string family = "powered_exponential";  // or brownian_bridge
  double mean = 0.0;
  double variance = 1.0;
  double nu = 1.9;
  double phi_pow_nu = 4.0;

  std::size_t reference_size = 500;
  std::string reference_layout = "uniform";  // uniform | grid
  std::string neighbor_rule = "nearest";     // nearest | radius | full
  int neighbors = 10;
  double radius = 1.0;
  std::string ordering = "sorted";  // sorted | random | given

  std::vector<int> cells{16, 16};
  int region_neighbors = 10;
  int components = 4;

  // field: points per axis (cell-centred), ascending
  std::vector<int> grid_sizes{25, 50, 100};
  // bb: refinement levels, 2^n grid points in each gap between references
  std::vector<int> levels{3, 9, 14};
  int pcgp_max_level = 9;
  int schedule_base = 12;
  int schedule_levels = 4;

  // mle
  std::vector<std::size_t> mle_sizes{2000, 5000, 10000};
  int generator_neighbors = 200;
  std::size_t pcgp_reference_size = 1000;
  std::vector<int> mle_cells{5, 5};
  int mle_neighbors = 15;
  bool crosscheck = true;

  Domain domain() const;
  CovarianceModel covariance() const;
  NeighborRule rule() const;
  OrderingRule ordering_rule() const;
  /// Throws ConfigError on any invalid field.
  void validate() const;
  std::uint64_t require_seed() const;
};

/// Desk-scale defaults for one experiment tag (no seed).
ExperimentConfig default_config(const std::string& experiment);
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& ini_text);

/// Replications x factor (at least 2); for factor < 1 every grid is capped
/// at kScaledGridCap points.
inline constexpr std::size_t kScaledGridCap = 2500;
ExperimentConfig apply_scale(ExperimentConfig config, double factor);

struct ResultRow {
  std::string model;
  std::size_t grid_size = 0;
  std::string statistic;
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t replications = 0;
};

/// A CSV file: header plus rows of already formatted cells.
struct Table {
  std::string name;  // file name
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
};

std::string format_number(double v);
std::string format_number(std::size_t v);

struct ExperimentReport {
  std::string experiment;
  std::vector<ResultRow> summary;
  std::vector<Table> tables;

  void add_row(ResultRow row);  // throws on a duplicate (model, M, statistic)
  const ResultRow& row(const std::string& model, std::size_t grid_size,
                       const std::string& statistic) const;
  const ResultRow* find(const std::string& model, std::size_t grid_size,
                        const std::string& statistic) const;
  Table summary_table() const;
};

inline constexpr int kHistogramBins = 80;

/// (bin_left, bin_right, count) over [lo, hi); values outside are clamped
/// into the edge bins.
Table histogram_table(std::string name, const std::vector<double>& values, double lo, double hi,
                      int bins = kHistogramBins);

ExperimentReport run_bb(const ExperimentConfig& config);
ExperimentReport run_field(const ExperimentConfig& config);
ExperimentReport run_theorem_probe(const ExperimentConfig& config);
ExperimentReport run_mle(const ExperimentConfig& config);
ExperimentReport run_mpcgp_compare(const ExperimentConfig& config);

ExperimentReport run_experiment(const ExperimentConfig& config);

std::string csv_text(const Table& table);
/// Writes summary.csv and every table into config.output_dir.
std::vector<std::filesystem::path> write_report(const ExperimentReport& report,
                                                const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config,
                    const std::vector<std::filesystem::path>& files, double wall_seconds,
                    int threads);

/// Whole command line: parse, run, write.  Returns the process exit code.
int cli_main(int argc, const char* const* argv);

}  // namespace sparsefield
