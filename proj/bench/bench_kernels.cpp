// Serial reference against the OpenMP variant of each kernel. Arg 0 is the
// serial kernel, arg 1 the parallel one.

#include <benchmark/benchmark.h>

#include <vector>

#include "synthlabel/kernels.hpp"
#include "synthlabel/rng.hpp"

using namespace synthlabel;
using kernels::Exec;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "openmp" : "serial"); }

// First encoder layer on a 32x32 RGB image.
void BM_Conv2dForward(benchmark::State& state) {
  const auto g = kernels::conv_geometry({3, 32, 32}, {8, 3, 3, 3}, 1);
  const auto in = random_vector(3 * 32 * 32, 1), w = random_vector(8 * 3 * 9, 2);
  std::vector<double> out(g.kernels * g.out_h * g.out_w);
  for (auto _ : state) {
    kernels::conv2d_forward(exec_of(state), g, in, w, out);
    benchmark::DoNotOptimize(out.data());
  }
  label(state);
}

void BM_Conv2dBackward(benchmark::State& state) {
  const auto g = kernels::conv_geometry({3, 32, 32}, {8, 3, 3, 3}, 1);
  const auto in = random_vector(3 * 32 * 32, 1), w = random_vector(8 * 3 * 9, 2);
  const auto dout = random_vector(g.kernels * g.out_h * g.out_w, 3);
  std::vector<double> din(in.size()), dw(w.size());
  for (auto _ : state) {
    kernels::conv2d_backward_input(exec_of(state), g, dout, w, din);
    kernels::conv2d_backward_kernel(exec_of(state), g, dout, in, dw);
    benchmark::DoNotOptimize(din.data());
    benchmark::DoNotOptimize(dw.data());
  }
  label(state);
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = 128;
  const auto a = random_vector(n * n, 4), b = random_vector(n * n, 5);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernels::matmul(exec_of(state), n, n, n, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  label(state);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

// Gram matrix of 500 embeddings of width 64, the SVM wrapper's workload.
void BM_RbfGram(benchmark::State& state) {
  Tensor x({500, 64});
  const auto v = random_vector(x.size(), 6);
  std::copy(v.begin(), v.end(), x.data().begin());
  for (auto _ : state) {
    auto k = kernels::rbf_gram(exec_of(state), x, 0.1);
    benchmark::DoNotOptimize(k.data().data());
  }
  label(state);
}

}  // namespace

BENCHMARK(BM_Conv2dForward)->Arg(0)->Arg(1);
BENCHMARK(BM_Conv2dBackward)->Arg(0)->Arg(1);
BENCHMARK(BM_Matmul)->Arg(0)->Arg(1);
BENCHMARK(BM_RbfGram)->Arg(0)->Arg(1);
BENCHMARK_MAIN();
