#include "synthlabel/convnet.hpp"

#include <cmath>
#include <sstream>

#include "synthlabel/error.hpp"

namespace synthlabel {

std::string format_conv_layers(const std::vector<ConvLayerSpec>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out += ',';
    const auto& l = layers[i];
    out += std::to_string(l.out_channels) + ':' + std::to_string(l.kernel) + ':' +
           std::to_string(l.stride) + ':' + std::to_string(l.pool);
  }
  return out;
}

std::vector<ConvLayerSpec> parse_conv_layers(const std::string& text) {
  std::vector<ConvLayerSpec> layers;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream fs(item);
    std::string part;
    std::vector<std::uint64_t> fields;
    while (std::getline(fs, part, ':')) fields.push_back(parse_u64(part, "conv layer '" + item + "'"));
    if (fields.size() != 4) {
      throw ConfigError("conv layer '" + item + "' must be out_channels:kernel:stride:pool");
    }
    layers.push_back({fields[0], fields[1], fields[2], fields[3]});
  }
  return layers;
}

void ConvNetConfig::validate() const {
  if (in_channels == 0 || in_h == 0 || in_w == 0) throw ParameterError("input size must be positive");
  if (out_dim == 0) throw ParameterError("output dimension must be positive");
  feature_shape();
}

Shape ConvNetConfig::feature_shape() const {
  std::size_t c = in_channels, h = in_h, w = in_w;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.out_channels == 0 || l.kernel == 0 || l.stride == 0 || l.pool == 0) {
      throw ParameterError("conv layer " + std::to_string(i) + " has a zero field");
    }
    if (l.kernel > h || l.kernel > w) {
      throw ParameterError("conv layer " + std::to_string(i) + ": kernel " +
                           std::to_string(l.kernel) + " exceeds spatial size " +
                           std::to_string(h) + "x" + std::to_string(w));
    }
    h = (h - l.kernel) / l.stride + 1;
    w = (w - l.kernel) / l.stride + 1;
    if (l.pool > h || l.pool > w) {
      throw ParameterError("conv layer " + std::to_string(i) + ": pool " + std::to_string(l.pool) +
                           " exceeds spatial size " + std::to_string(h) + "x" + std::to_string(w));
    }
    h /= l.pool;
    w /= l.pool;
    c = l.out_channels;
  }
  return {c, h, w};
}

std::size_t ConvNetConfig::flat_features() const { return shape_numel(feature_shape()); }

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

ConvNet ConvNet::zeros(const ConvNetConfig& config) {
  config.validate();
  ConvNet net;
  net.config_ = config;
  std::size_t c = config.in_channels;
  for (const auto& l : config.layers) {
    net.kernels_.emplace_back(Shape{l.out_channels, c, l.kernel, l.kernel});
    net.biases_.emplace_back(Shape{l.out_channels});
    c = l.out_channels;
  }
  net.dense_w_ = Tensor({config.flat_features(), config.out_dim});
  net.dense_b_ = Tensor({config.out_dim});
  return net;
}

ConvNet ConvNet::init(const ConvNetConfig& config, std::uint64_t seed) {
  ConvNet net = zeros(config);
  Rng rng(seed);
  for (auto& k : net.kernels_) {
    const std::size_t area = k.dim(2) * k.dim(3);
    k = glorot_uniform(k.shape(), k.dim(1) * area, k.dim(0) * area, rng);
  }
  net.dense_w_ = glorot_uniform(net.dense_w_.shape(), net.dense_w_.dim(0), net.dense_w_.dim(1), rng);
  return net;
}

std::vector<const Tensor*> ConvNet::parameters() const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < kernels_.size(); ++i) {
    out.push_back(&kernels_[i]);
    out.push_back(&biases_[i]);
  }
  out.push_back(&dense_w_);
  out.push_back(&dense_b_);
  return out;
}

std::vector<Tensor*> ConvNet::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < kernels_.size(); ++i) {
    out.push_back(&kernels_[i]);
    out.push_back(&biases_[i]);
  }
  out.push_back(&dense_w_);
  out.push_back(&dense_b_);
  return out;
}

std::vector<ad::Var> ConvNet::bind(ad::Graph& g, bool trainable) const {
  std::vector<ad::Var> vars;
  for (const Tensor* p : parameters()) vars.push_back(trainable ? g.parameter(*p) : g.constant_ref(*p));
  return vars;
}

ad::Var ConvNet::forward(ad::Graph& g, const std::vector<ad::Var>& bound, ad::Var image) const {
  const Shape expected{config_.in_channels, config_.in_h, config_.in_w};
  if (g.value(image).shape() != expected) {
    throw DimensionError("conv stack expects input " + shape_str(expected) + ", got " +
                         shape_str(g.value(image).shape()));
  }
  ad::Var x = image;
  for (std::size_t i = 0; i < config_.layers.size(); ++i) {
    const auto& l = config_.layers[i];
    x = ad::conv2d(g, x, bound[2 * i], l.stride);
    x = ad::add_bias(g, x, bound[2 * i + 1]);
    x = ad::relu(g, x);
    if (l.pool > 1) x = ad::max_pool2d(g, x, l.pool);
  }
  x = ad::reshape(g, x, {1, config_.flat_features()});
  const std::size_t n = 2 * config_.layers.size();
  x = ad::matmul(g, x, bound[n]);
  return ad::add_bias(g, x, bound[n + 1]);
}

}  // namespace synthlabel
