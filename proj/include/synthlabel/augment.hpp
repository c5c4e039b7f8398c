#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "synthlabel/kv.hpp"
#include "synthlabel/tensor.hpp"

namespace synthlabel {

/// Stochastic view transformation: crop -> resize -> flips -> rotation ->
/// colour jitter. The crop scale is an area fraction of the source with the
/// source aspect ratio kept.
struct AugmentationSpec {
  double crop_scale_lo = 0.4;
  double crop_scale_hi = 1.0;
  double flip_h_prob = 0.5;
  double flip_v_prob = 0.5;
  double rot90_prob = 0.5;
  double jitter_strength = 0.2;
  std::size_t output_h = 32;
  std::size_t output_w = 32;

  /// Throws ParameterError on an invalid spec.
  void validate() const;

  /// Spec whose application leaves an image of this size unchanged.
  static AugmentationSpec identity(std::size_t h, std::size_t w);

  KeyValues to_kv() const;
  static AugmentationSpec from_kv(const KeyValues& kv);

  bool operator==(const AugmentationSpec&) const = default;
};

struct AugSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

/// Sampled parameters of one view; a pure function of (spec, image shape, seed).
struct AugParams {
  std::size_t crop_y = 0, crop_x = 0, crop_h = 0, crop_w = 0;
  bool flip_h = false;
  bool flip_v = false;
  int quarter_turns = 0;  // counter-clockwise, 0..3
  std::vector<double> channel_scale;
  std::vector<double> channel_shift;
};

AugParams sample_aug_params(const AugmentationSpec& spec, const Shape& image_shape, AugSeed seed);
Tensor apply_aug_params(const AugmentationSpec& spec, const AugParams& params, const Tensor& image);

/// One augmented view. Output is spec.output_h x spec.output_w, clamped to [0,1].
Tensor augment(const AugmentationSpec& spec, const Tensor& image, AugSeed seed);

/// The two views of sample k (1-based), drawn from streams 2k-1 and 2k.
std::pair<Tensor, Tensor> make_pair(const AugmentationSpec& spec, const Tensor& image,
                                    std::uint64_t base_seed, std::uint64_t sample_index);

// Building blocks, all on CxHxW images.
Tensor crop(const Tensor& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
/// Corner-aligned bilinear resize; exact identity when the size is unchanged.
Tensor resize_bilinear(const Tensor& image, std::size_t h, std::size_t w);
Tensor flip_horizontal(const Tensor& image);
Tensor flip_vertical(const Tensor& image);
/// One counter-clockwise quarter turn.
Tensor rotate90(const Tensor& image);

}  // namespace synthlabel
