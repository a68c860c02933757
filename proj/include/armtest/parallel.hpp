#pragma once

#include <cstddef>
#include <exception>
#include <limits>

namespace armtest {

// Worker count for the OpenMP kernels; 1 when built without OpenMP.
int worker_count();
void set_worker_count(int workers);

// Reads ARMTEST_WORKERS, if set, into set_worker_count().
void configure_workers_from_env();

// Runs fn(i) for i in [0, n) across the worker pool. Each index writes
// only its own slot, so results never depend on scheduling. If any call
// throws, the exception from the lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::exception_ptr error;
  std::size_t error_index = std::numeric_limits<std::size_t>::max();
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(armtest_parallel_for_error)
      {
        if (static_cast<std::size_t>(i) < error_index) {
          error_index = static_cast<std::size_t>(i);
          error = std::current_exception();
        }
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace armtest
