#pragma once

// Encoder f (conv stack -> ReLU -> embedding h) and projection head g
// (dense -> ReLU -> dense -> z). Downstream stages consume h only; z exists
// for the contrastive loss.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "synthlabel/autodiff.hpp"
#include "synthlabel/convnet.hpp"
#include "synthlabel/kv.hpp"

namespace synthlabel {

struct EncoderConfig {
  std::size_t in_channels = 3;
  std::size_t in_h = 32;
  std::size_t in_w = 32;
  std::vector<ConvLayerSpec> conv_layers{{8, 3, 1, 2}, {16, 3, 1, 2}, {32, 3, 1, 2}};
  std::size_t embed_dim = 64;
  std::size_t proj_hidden_dim = 64;
  std::size_t proj_out_dim = 32;
  /// Standardise each input channel per image before the conv stack, which
  /// makes h invariant to per-channel brightness and contrast.
  bool standardize_input = true;

  void validate() const;
  ConvNetConfig backbone_config() const;

  KeyValues to_kv() const;
  static EncoderConfig from_kv(const KeyValues& kv);

  bool operator==(const EncoderConfig&) const = default;
};

class EncoderModel {
 public:
  EncoderModel() = default;

  static EncoderModel init(const EncoderConfig& config, std::uint64_t seed);
  static EncoderModel zeros(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  const ConvNet& backbone() const { return backbone_; }

  /// theta (backbone) followed by W (projection w1, b1, w2, b2).
  std::vector<const Tensor*> parameters() const;
  std::vector<Tensor*> parameters();

  struct Bound {
    std::vector<ad::Var> backbone;
    ad::Var w1, b1, w2, b2;
  };
  Bound bind(ad::Graph& g, bool trainable) const;
  /// image -> h as [1 x embed_dim].
  ad::Var encode(ad::Graph& g, const Bound& bound, ad::Var image) const;
  /// h [1 x embed_dim] -> z [1 x proj_out_dim].
  ad::Var project(ad::Graph& g, const Bound& bound, ad::Var h) const;

  bool operator==(const EncoderModel&) const = default;

 private:
  EncoderConfig config_;
  ConvNet backbone_;
  Tensor w1_, b1_, w2_, b2_;
};

/// h = f(image); returns a [embed_dim] vector.
Tensor encode(const EncoderModel& model, const Tensor& image);
/// z = g(h); h is [embed_dim], returns [proj_out_dim].
Tensor project(const EncoderModel& model, const Tensor& h);

/// Checkpoint: length-prefixed canonical config text, then the parameter
/// tensors as TNSR records in declared order.
void write_encoder(std::ostream& out, const EncoderModel& model);
EncoderModel read_encoder(std::istream& in);
void save_encoder(const std::filesystem::path& path, const EncoderModel& model);
EncoderModel load_encoder(const std::filesystem::path& path);

/// Short content hash of the checkpoint bytes; used as provenance.
std::string encoder_hash(const EncoderModel& model);

}  // namespace synthlabel
