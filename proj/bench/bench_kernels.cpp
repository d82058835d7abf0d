// Serial reference kernels vs the OpenMP ones.  Prints one CSV line per
// kernel: kernel,n,threads,serial_s,parallel_s,speedup.  Timings are best of
// --repeats runs; outputs are also compared for bitwise equality.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include <CLI11.hpp>

#include "sparsefield/field_model.hpp"
#include "sparsefield/parallel.hpp"
#include "sparsefield/pcgp.hpp"

using namespace sparsefield;

namespace {

double best_of(int repeats, const std::function<void()>& f) {
  double best = 1e300;
  for (int k = 0; k < repeats; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* kernel, std::size_t n, int threads, double s, double p, bool same) {
  std::printf("%s,%zu,%d,%.6f,%.6f,%.2f%s\n", kernel, n, threads, s, p, s / p, same ? "" : ",MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel timings"};
  std::size_t n = 40000, r = 2000;
  int threads = 0, repeats = 3;
  app.add_option("-n", n, "target count");
  app.add_option("-r", r, "reference count");
  app.add_option("--threads", threads, "OpenMP threads (0: default)");
  app.add_option("--repeats", repeats, "runs per timing");
  CLI11_PARSE(app, argc, argv);

  const int workers = resolve_thread_count(threads);
  set_thread_count(workers);
  const Domain sq({0.0, 0.0}, {10.0, 10.0});
  const CovarianceModel m{0.0, 1.0, PoweredExponential::from_phi_pow_nu(4.0, 1.9)};
  const StreamKey key(7);
  const auto field = make_nngp_field(m, uniform_locations(sq, r, key.child(0)), NearestM{10});
  const auto targets = uniform_locations(sq, n, key.child(1));
  const std::vector<int> cells{20, 20};
  const auto pcgp = make_pcgp_field(field, make_partition(sq, cells), 10);
  const Vector z = simulate_reference(*field.factor, key.child(2));
  const std::span<const double> zs(z.data(), static_cast<std::size_t>(z.size()));

  std::printf("kernel,n,threads,serial_s,parallel_s,speedup\n");
  {
    SparseFactor a, b;
    const double s = best_of(repeats, [&] { a = serial::build_reference_factor(m, *field.refset); });
    const double p = best_of(repeats, [&] { b = build_reference_factor(m, *field.refset); });
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = a.nodes[i].sd == b.nodes[i].sd;
    report("reference_factor", r, workers, s, p, same);
  }
  TargetConditionals ca, cb;
  {
    const NeighborRule rule = NearestM{10};
    const double s = best_of(repeats, [&] { ca = serial::target_conditionals(m, *field.refset, targets, rule); });
    const double p = best_of(repeats, [&] { cb = target_conditionals(m, *field.refset, targets, rule); });
    bool same = true;
    for (std::size_t i = 0; same && i < n; ++i) same = ca[i].sd == cb[i].sd;
    report("target_conditionals", n, workers, s, p, same);
  }
  {
    std::vector<double> a(n), b(n);
    const double s = best_of(repeats, [&] { serial::simulate_targets_into(ca, zs, key.child(3), a); });
    const double p = best_of(repeats, [&] { simulate_targets_into(cb, zs, key.child(3), b); });
    report("simulate_targets", n, workers, s, p, a == b);
  }
  BlockList ba, bb;
  {
    const double s = best_of(repeats, [&] { ba = serial::build_block_conditionals(pcgp.pcgp, targets); });
    const double p = best_of(repeats, [&] { bb = build_block_conditionals(pcgp.pcgp, targets); });
    report("block_conditionals", n, workers, s, p, ba.size() == bb.size());
  }
  {
    std::vector<double> a(n), b(n);
    const double s = best_of(repeats, [&] { serial::simulate_blocks_into(ba, zs, key.child(4), a); });
    const double p = best_of(repeats, [&] { simulate_blocks_into(bb, zs, key.child(4), b); });
    report("simulate_blocks", n, workers, s, p, a == b);
  }
  return 0;
}
