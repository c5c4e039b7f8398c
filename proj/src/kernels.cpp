#include "synthlabel/kernels.hpp"

#include <cmath>

#include "synthlabel/error.hpp"
#include "synthlabel/parallel.hpp"

namespace synthlabel::kernels {

namespace {

// Runs body(i) for i in [0, n), serially or with an OpenMP static split.
template <typename F>
void for_range(Exec exec, std::size_t n, F&& body) {
  if (exec == Exec::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto count = static_cast<long long>(n);
  const int threads = parallel::worker_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

void conv_forward_channel(const ConvGeometry& g, std::size_t k, const double* in,
                          const double* w, double* out) {
  double* out_k = out + k * g.out_h * g.out_w;
  std::fill(out_k, out_k + g.out_h * g.out_w, 0.0);
  const double* w_k = w + k * g.channels * g.kernel_h * g.kernel_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* in_c = in + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        const double wv = w_k[(c * g.kernel_h + i) * g.kernel_w + j];
        for (std::size_t y = 0; y < g.out_h; ++y) {
          const double* src = in_c + (y * g.stride + i) * g.width + j;
          double* dst = out_k + y * g.out_w;
          if (g.stride == 1) {
            for (std::size_t x = 0; x < g.out_w; ++x) dst[x] += wv * src[x];
          } else {
            for (std::size_t x = 0; x < g.out_w; ++x) dst[x] += wv * src[x * g.stride];
          }
        }
      }
    }
  }
}

void conv_backward_input_channel(const ConvGeometry& g, std::size_t c, const double* dout,
                                 const double* w, double* din) {
  double* din_c = din + c * g.height * g.width;
  for (std::size_t k = 0; k < g.kernels; ++k) {
    const double* dout_k = dout + k * g.out_h * g.out_w;
    const double* w_kc = w + (k * g.channels + c) * g.kernel_h * g.kernel_w;
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        const double wv = w_kc[i * g.kernel_w + j];
        for (std::size_t y = 0; y < g.out_h; ++y) {
          const double* src = dout_k + y * g.out_w;
          double* dst = din_c + (y * g.stride + i) * g.width + j;
          if (g.stride == 1) {
            for (std::size_t x = 0; x < g.out_w; ++x) dst[x] += wv * src[x];
          } else {
            for (std::size_t x = 0; x < g.out_w; ++x) dst[x * g.stride] += wv * src[x];
          }
        }
      }
    }
  }
}

void conv_backward_kernel_channel(const ConvGeometry& g, std::size_t k, const double* dout,
                                  const double* in, double* dw) {
  const double* dout_k = dout + k * g.out_h * g.out_w;
  double* dw_k = dw + k * g.channels * g.kernel_h * g.kernel_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* in_c = in + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        double acc = 0.0;
        for (std::size_t y = 0; y < g.out_h; ++y) {
          const double* src = in_c + (y * g.stride + i) * g.width + j;
          const double* d = dout_k + y * g.out_w;
          if (g.stride == 1) {
            for (std::size_t x = 0; x < g.out_w; ++x) acc += d[x] * src[x];
          } else {
            for (std::size_t x = 0; x < g.out_w; ++x) acc += d[x] * src[x * g.stride];
          }
        }
        dw_k[(c * g.kernel_h + i) * g.kernel_w + j] += acc;
      }
    }
  }
}

}  // namespace

Exec default_exec() {
  return (parallel::worker_threads() > 1 && !parallel::in_parallel_region()) ? Exec::parallel
                                                                              : Exec::serial;
}

ConvGeometry conv_geometry(const Shape& input, const Shape& kernels, std::size_t stride) {
  if (input.size() != 3 || kernels.size() != 4) {
    throw DimensionError("conv2d expects input CxHxW and kernels KxCxkhxkw, got " +
                         shape_str(input) + " and " + shape_str(kernels));
  }
  if (stride == 0) throw ParameterError("conv2d stride must be positive");
  if (kernels[1] != input[0]) {
    throw DimensionError("conv2d channel mismatch: input " + shape_str(input) + ", kernels " +
                         shape_str(kernels));
  }
  if (kernels[2] > input[1] || kernels[3] > input[2]) {
    throw DimensionError("conv2d kernel " + shape_str(kernels) + " larger than input " +
                         shape_str(input));
  }
  ConvGeometry g{};
  g.channels = input[0];
  g.height = input[1];
  g.width = input[2];
  g.kernels = kernels[0];
  g.kernel_h = kernels[2];
  g.kernel_w = kernels[3];
  g.stride = stride;
  g.out_h = (g.height - g.kernel_h) / stride + 1;
  g.out_w = (g.width - g.kernel_w) / stride + 1;
  return g;
}

void conv2d_forward(Exec exec, const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> w, std::span<double> out) {
  for_range(exec, g.kernels,
            [&](std::size_t k) { conv_forward_channel(g, k, in.data(), w.data(), out.data()); });
}

void conv2d_backward_input(Exec exec, const ConvGeometry& g, std::span<const double> dout,
                           std::span<const double> w, std::span<double> din) {
  for_range(exec, g.channels, [&](std::size_t c) {
    conv_backward_input_channel(g, c, dout.data(), w.data(), din.data());
  });
}

void conv2d_backward_kernel(Exec exec, const ConvGeometry& g, std::span<const double> dout,
                            std::span<const double> in, std::span<double> dw) {
  for_range(exec, g.kernels, [&](std::size_t k) {
    conv_backward_kernel_channel(g, k, dout.data(), in.data(), dw.data());
  });
}

void matmul(Exec exec, std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
            std::span<const double> b, std::span<double> c) {
  for_range(exec, m, [&](std::size_t r) {
    double* cr = c.data() + r * n;
    std::fill(cr, cr + n, 0.0);
    const double* ar = a.data() + r * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * bp[j];
    }
  });
}

void matmul_grad_a(Exec exec, std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> dc, std::span<const double> b, std::span<double> da) {
  for_range(exec, m, [&](std::size_t r) {
    const double* dcr = dc.data() + r * n;
    double* dar = da.data() + r * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b.data() + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += dcr[j] * bp[j];
      dar[p] += acc;
    }
  });
}

void matmul_grad_b(Exec exec, std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> a, std::span<const double> dc, std::span<double> db) {
  for_range(exec, k, [&](std::size_t p) {
    double* dbp = db.data() + p * n;
    for (std::size_t r = 0; r < m; ++r) {
      const double av = a[r * k + p];
      const double* dcr = dc.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) dbp[j] += av * dcr[j];
    }
  });
}

Tensor rbf_gram(Exec exec, const Tensor& x, double gamma) {
  if (x.rank() != 2) throw DimensionError("rbf_gram expects a matrix, got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0);
  Tensor out({n, n});
  for_range(exec, n, [&](std::size_t i) {
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      out.at(i, j) = std::exp(-gamma * squared_distance(xi, x.row(j)));
    }
  });
  return out;
}

}  // namespace synthlabel::kernels
