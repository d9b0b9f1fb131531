#pragma once

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace skinest {

/// Serial is the reference path; Parallel runs the same body under OpenMP.
/// Every parallel loop in this project writes to disjoint per-index slots
/// and all reductions happen serially afterwards, so the two policies
/// produce bit-identical results (asserted in the test suite).
enum class ExecPolicy { Serial, Parallel };

template <typename Fn>
void parallel_for(int count, ExecPolicy policy, Fn&& body) {
#if defined(_OPENMP)
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < count; ++k) {
      body(k);
    }
    return;
  }
#else
  (void)policy;
#endif
  for (int k = 0; k < count; ++k) {
    body(k);
  }
}

inline int hardware_thread_count() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace skinest
