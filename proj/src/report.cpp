#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sparsefield/experiments.hpp"

namespace sparsefield {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string format_number(std::size_t v) { return std::to_string(v); }

void Table::add(std::vector<std::string> row) {
  if (row.size() != header.size()) {
    throw std::logic_error("table " + name + ": row width " + std::to_string(row.size()) +
                           " != header width " + std::to_string(header.size()));
  }
  rows.push_back(std::move(row));
}

const ResultRow* ExperimentReport::find(const std::string& model, std::size_t grid_size,
                                        const std::string& statistic) const {
  for (const auto& r : summary) {
    if (r.model == model && r.grid_size == grid_size && r.statistic == statistic) return &r;
  }
  return nullptr;
}

const ResultRow& ExperimentReport::row(const std::string& model, std::size_t grid_size,
                                       const std::string& statistic) const {
  const auto* r = find(model, grid_size, statistic);
  if (!r) {
    throw std::out_of_range("no result row (" + model + ", " + std::to_string(grid_size) + ", " +
                            statistic + ")");
  }
  return *r;
}

void ExperimentReport::add_row(ResultRow row) {
  if (row.sd < 0.0) throw std::logic_error("result row with negative sd");
  if (find(row.model, row.grid_size, row.statistic)) {
    throw std::logic_error("duplicate result row (" + row.model + ", " +
                           std::to_string(row.grid_size) + ", " + row.statistic + ")");
  }
  summary.push_back(std::move(row));
}

Table ExperimentReport::summary_table() const {
  Table t{"summary.csv", {"model", "M", "statistic", "mean", "sd", "mc_se", "replications"}, {}};
  for (const auto& r : summary) {
    t.add({r.model, format_number(r.grid_size), r.statistic, format_number(r.mean), format_number(r.sd),
           format_number(r.se), format_number(r.replications)});
  }
  return t;
}

Table histogram_table(std::string name, const std::vector<double>& values, double lo, double hi, int bins) {
  if (!(hi > lo) || bins < 1) throw PreconditionError("histogram: need lo < hi and bins >= 1");
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (double v : values) {
    auto b = static_cast<long>(std::floor((v - lo) / width));
    b = std::clamp<long>(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  Table t{std::move(name), {"bin_left", "bin_right", "count"}, {}};
  for (int b = 0; b < bins; ++b) {
    t.add({format_number(lo + b * width), format_number(lo + (b + 1) * width),
           format_number(counts[static_cast<std::size_t>(b)])});
  }
  return t;
}

std::string csv_text(const Table& table) {
  std::string out;
  const auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

std::vector<std::filesystem::path> write_report(const ExperimentReport& report,
                                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const auto write = [&](const Table& t) {
    const auto path = dir / t.name;
    std::ofstream out(path, std::ios::binary);
    out << csv_text(t);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    written.push_back(path);
  };
  write(report.summary_table());
  for (const auto& t : report.tables) write(t);
  return written;
}

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& c,
                    const std::vector<std::filesystem::path>& files, double wall_seconds, int threads) {
  nlohmann::ordered_json j;
  j["library"] = "sparsefield";
  j["version"] = kLibraryVersion;
  j["wall_seconds"] = wall_seconds;
  j["threads"] = threads;
  nlohmann::ordered_json cfg;
  cfg["experiment"] = c.experiment;
  cfg["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
  cfg["replications"] = c.replications;
  cfg["domain"] = {{"lower", c.domain_lower}, {"upper", c.domain_upper}};
  cfg["covariance"] = {{"family", c.family}, {"mean", c.mean},  {"variance", c.variance},
                       {"nu", c.nu},         {"phi_pow_nu", c.phi_pow_nu}};
  cfg["reference"] = {{"size", c.reference_size}, {"layout", c.reference_layout},
                      {"rule", c.neighbor_rule},  {"neighbors", c.neighbors},
                      {"radius", c.radius},       {"ordering", c.ordering}};
  cfg["pcgp"] = {{"cells", c.cells},
                 {"region_neighbors", c.region_neighbors},
                 {"components", c.components},
                 {"max_level", c.pcgp_max_level}};
  cfg["grids"] = {{"sizes", c.grid_sizes},
                  {"levels", c.levels},
                  {"schedule_base", c.schedule_base},
                  {"schedule_levels", c.schedule_levels}};
  cfg["mle"] = {{"sizes", c.mle_sizes},
                {"generator_neighbors", c.generator_neighbors},
                {"reference_size", c.pcgp_reference_size},
                {"cells", c.mle_cells},
                {"neighbors", c.mle_neighbors},
                {"crosscheck", c.crosscheck}};
  j["config"] = cfg;
  std::vector<std::string> names;
  for (const auto& f : files) names.push_back(f.filename().string());
  j["files"] = names;
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
}

}  // namespace sparsefield
