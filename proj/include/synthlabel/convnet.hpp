#pragma once

// Conv stack shared by the encoder and the inductive classifier:
// [conv -> bias -> relu -> maxpool]* -> flatten -> dense.

#include <cstdint>
#include <string>
#include <vector>

#include "synthlabel/autodiff.hpp"
#include "synthlabel/kv.hpp"
#include "synthlabel/rng.hpp"
#include "synthlabel/tensor.hpp"

namespace synthlabel {

struct ConvLayerSpec {
  std::size_t out_channels = 8;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pool = 2;  // 1 disables pooling

  bool operator==(const ConvLayerSpec&) const = default;
};

/// "8:3:1:2,16:3:1:2" <-> layer list (out_channels:kernel:stride:pool).
std::string format_conv_layers(const std::vector<ConvLayerSpec>& layers);
std::vector<ConvLayerSpec> parse_conv_layers(const std::string& text);

struct ConvNetConfig {
  std::size_t in_channels = 3;
  std::size_t in_h = 32;
  std::size_t in_w = 32;
  std::vector<ConvLayerSpec> layers;
  std::size_t out_dim = 64;

  /// Throws ParameterError if any spatial dimension collapses below 1.
  void validate() const;
  /// CxHxW after the last conv block.
  Shape feature_shape() const;
  std::size_t flat_features() const;

  bool operator==(const ConvNetConfig&) const = default;
};

class ConvNet {
 public:
  ConvNet() = default;
  /// Glorot-uniform weights, zero biases; deterministic in `seed`.
  static ConvNet init(const ConvNetConfig& config, std::uint64_t seed);
  /// All-zero parameters of the right shapes.
  static ConvNet zeros(const ConvNetConfig& config);

  const ConvNetConfig& config() const { return config_; }

  /// Parameters in declared order: per layer (kernel, bias), then dense
  /// weight [F x out], dense bias [out].
  std::vector<const Tensor*> parameters() const;
  std::vector<Tensor*> parameters();

  /// Puts parameters on `g` (trainable or as constants), in declared order.
  std::vector<ad::Var> bind(ad::Graph& g, bool trainable) const;
  /// image CxHxW -> [1 x out_dim], no activation on the output.
  ad::Var forward(ad::Graph& g, const std::vector<ad::Var>& bound, ad::Var image) const;

  bool operator==(const ConvNet&) const = default;

 private:
  ConvNetConfig config_;
  std::vector<Tensor> kernels_;
  std::vector<Tensor> biases_;
  Tensor dense_w_;
  Tensor dense_b_;
};

/// Uniform in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace synthlabel
