#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace isrm {

// OpenMP kernels fall back to inline serial execution when only one thread
// is available; the region setup otherwise dominates the small work items.
inline bool parallel_kernels_enabled() {
#ifdef _OPENMP
  return omp_get_max_threads() > 1;
#else
  return false;
#endif
}

}  // namespace isrm
