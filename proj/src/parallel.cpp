#include "armtest/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace armtest {

int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_worker_count(int workers) {
#ifdef _OPENMP
  if (workers > 0) omp_set_num_threads(workers);
#else
  (void)workers;
#endif
}

void configure_workers_from_env() {
  if (const char* env = std::getenv("ARMTEST_WORKERS")) {
    try {
      set_worker_count(std::stoi(env));
    } catch (const std::exception&) {
      // ignore unparsable values; keep the OpenMP default
    }
  }
}

}  // namespace armtest
