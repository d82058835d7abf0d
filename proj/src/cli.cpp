#include <chrono>
#include <iostream>

#include <CLI11.hpp>

#include "sparsefield/experiments.hpp"
#include "sparsefield/parallel.hpp"

namespace sparsefield {

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Sparse Gaussian field experiments"};
  std::string config_path, experiment, out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  double scale = 1.0;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--experiment", experiment, "bb | field | mle | mpcgp-compare | theorem-probe");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker threads (default: SPARSE_FIELD_THREADS or all cores)");
  app.add_option("--scale", scale, "multiplies replications; below 1 also caps grids at 2500 points");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  ExperimentConfig config;
  try {
    if (!config_path.empty()) {
      config = load_config(config_path);
      if (!experiment.empty() && experiment != config.experiment) {
        throw ConfigError("--experiment " + experiment + " does not match config experiment " + config.experiment);
      }
    } else if (!experiment.empty()) {
      config = default_config(experiment);
    } else {
      throw ConfigError("need --config or --experiment");
    }
    if (seed) config.seed = seed;
    if (!out.empty()) config.output_dir = out;
    config = apply_scale(config, scale);
    config.validate();
    config.require_seed();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    const int workers = resolve_thread_count(threads);
    set_thread_count(workers);
    const auto start = std::chrono::steady_clock::now();
    const ExperimentReport report = run_experiment(config);
    const auto files = write_report(report, config.output_dir);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(config.output_dir, config, files, secs, workers);
    std::cout << config.experiment << ": wrote " << files.size() << " files to " << config.output_dir.string()
              << " in " << secs << " s\n";
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace sparsefield
