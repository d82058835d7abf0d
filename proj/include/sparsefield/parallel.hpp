#pragma once

#include <cstddef>
#include <exception>
#include <limits>

namespace sparsefield {

/// Worker count used by the OpenMP kernels.  Values < 1 restore the default.
void set_thread_count(int threads);
int thread_count();

/// Resolves the worker count: explicit request, else SPARSE_FIELD_THREADS,
/// else the OpenMP default.
int resolve_thread_count(int requested);

/// Runs body(i) for i in [0, n) on the OpenMP team.  If iterations throw,
/// the exception from the smallest failing index is rethrown after the loop,
/// so failures are reported identically for any thread count.
template <typename Body>
void parallel_for(std::ptrdiff_t n, Body&& body) {
  std::exception_ptr error;
  std::ptrdiff_t error_index = std::numeric_limits<std::ptrdiff_t>::max();
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(sparsefield_parallel_for)
      if (i < error_index) {
        error_index = i;
        error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace sparsefield
