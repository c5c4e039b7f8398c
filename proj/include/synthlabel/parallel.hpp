#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace synthlabel::parallel {

/// Worker cap. Initialised from SYNTHLABEL_THREADS (0 or 1 = serial); when
/// the variable is unset, OpenMP's default is used.
int worker_threads();
void set_worker_threads(int n);

/// True when called from inside an OpenMP parallel region.
bool in_parallel_region();

/// Static-schedule loop over [0, n). Iterations must be independent and write
/// disjoint outputs; results are then identical for every thread count.
/// The exception of the lowest failing index is rethrown.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
  const int threads = in_parallel_region() ? 1 : worker_threads();
  std::exception_ptr error;
  std::size_t error_index = n;
  std::mutex mu;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(mu);
      if (static_cast<std::size_t>(i) < error_index) {
        error_index = static_cast<std::size_t>(i);
        error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace synthlabel::parallel
