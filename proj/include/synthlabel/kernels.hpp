#pragma once

// Numeric kernels behind the autodiff ops and the SVM Gram matrix. Every
// kernel has a serial reference and an OpenMP variant. Both run the same
// inner loop over a partition of the output, so they agree bit-for-bit.

#include <cstddef>
#include <span>

#include "synthlabel/tensor.hpp"

namespace synthlabel::kernels {

enum class Exec { serial, parallel };

/// Parallel when more than one worker is allowed and we are not already
/// inside a parallel region, serial otherwise.
Exec default_exec();

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kernels, kernel_h, kernel_w;
  std::size_t stride;
  std::size_t out_h, out_w;
};

/// Valid (unpadded) cross-correlation geometry; throws DimensionError if the
/// kernel does not fit.
ConvGeometry conv_geometry(const Shape& input, const Shape& kernels, std::size_t stride);

// out = conv(in, w); out is overwritten.
void conv2d_forward(Exec exec, const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> w, std::span<double> out);
// din += d(out)/d(in)^T dout
void conv2d_backward_input(Exec exec, const ConvGeometry& g, std::span<const double> dout,
                           std::span<const double> w, std::span<double> din);
// dw += d(out)/d(w)^T dout
void conv2d_backward_kernel(Exec exec, const ConvGeometry& g, std::span<const double> dout,
                            std::span<const double> in, std::span<double> dw);

// c[m x n] = a[m x k] b[k x n]
void matmul(Exec exec, std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
            std::span<const double> b, std::span<double> c);
// da[m x k] += dc[m x n] b^T
void matmul_grad_a(Exec exec, std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> dc, std::span<const double> b, std::span<double> da);
// db[k x n] += a^T dc
void matmul_grad_b(Exec exec, std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> a, std::span<const double> dc, std::span<double> db);

/// Full RBF Gram matrix K[i][j] = exp(-gamma * |x_i - x_j|^2) for rows of x.
Tensor rbf_gram(Exec exec, const Tensor& x, double gamma);

}  // namespace synthlabel::kernels
