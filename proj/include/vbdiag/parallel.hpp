#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vbdiag {

/// Serial is the reference path; Parallel distributes independent jobs over
/// OpenMP threads. Jobs are keyed by index and own their RNG streams, so
/// both paths produce bit-identical results.
enum class Execution { Serial, Parallel };

inline void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Runs job(i) for i in [0, n). The first exception (lowest index) is
/// rethrown after all jobs finish.
template <class Job>
void for_each_job(Execution exec, std::size_t n, Job&& job) {
  std::vector<std::exception_ptr> errors(n);
  if (exec == Execution::Serial) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
      try {
        job(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Static-schedule data-parallel loop for cheap per-element kernels.
template <class Body>
void parallel_for(Execution exec, std::size_t n, Body&& body) {
  if (exec == Execution::Serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

}  // namespace vbdiag
