#include "sparsefield/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace sparsefield {

namespace {
int g_default_threads = 0;
}

void set_thread_count(int threads) {
  if (g_default_threads == 0) g_default_threads = omp_get_max_threads();
  omp_set_num_threads(threads >= 1 ? threads : g_default_threads);
}

int thread_count() { return omp_get_max_threads(); }

int resolve_thread_count(int requested) {
  if (requested >= 1) return requested;
  if (const char* env = std::getenv("SPARSE_FIELD_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

}  // namespace sparsefield
