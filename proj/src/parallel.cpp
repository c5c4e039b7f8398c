#include "synthlabel/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace synthlabel::parallel {

namespace {

int threads_from_env() {
  const char* env = std::getenv("SYNTHLABEL_THREADS");
  if (env == nullptr || *env == '\0') return omp_get_max_threads();
  try {
    const int n = std::stoi(env);
    return n <= 0 ? 1 : n;
  } catch (...) {
    return 1;
  }
}

std::atomic<int>& cap() {
  static std::atomic<int> value{threads_from_env()};
  return value;
}

}  // namespace

int worker_threads() { return cap().load(); }

void set_worker_threads(int n) { cap().store(n <= 0 ? 1 : n); }

bool in_parallel_region() { return omp_in_parallel() != 0; }

}  // namespace synthlabel::parallel
