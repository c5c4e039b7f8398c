#include "synthlabel/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "synthlabel/error.hpp"
#include "synthlabel/rng.hpp"

namespace synthlabel {

namespace {

void require_image(const Tensor& image, const char* op) {
  if (image.rank() != 3) {
    throw DimensionError(std::string(op) + " expects a CxHxW image, got " +
                         shape_str(image.shape()));
  }
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void AugmentationSpec::validate() const {
  if (!(crop_scale_lo > 0.0 && crop_scale_lo <= crop_scale_hi && crop_scale_hi <= 1.0)) {
    throw ParameterError("crop scale range must satisfy 0 < lo <= hi <= 1");
  }
  if (!is_probability(flip_h_prob) || !is_probability(flip_v_prob) ||
      !is_probability(rot90_prob)) {
    throw ParameterError("augmentation probabilities must lie in [0, 1]");
  }
  if (!(jitter_strength >= 0.0)) throw ParameterError("jitter strength must be >= 0");
  if (output_h == 0 || output_w == 0) throw ParameterError("augmentation output size must be positive");
  if (rot90_prob > 0.0 && output_h != output_w) {
    throw ParameterError("rot90 needs a square output size");
  }
}

AugmentationSpec AugmentationSpec::identity(std::size_t h, std::size_t w) {
  AugmentationSpec s;
  s.crop_scale_lo = s.crop_scale_hi = 1.0;
  s.flip_h_prob = s.flip_v_prob = s.rot90_prob = 0.0;
  s.jitter_strength = 0.0;
  s.output_h = h;
  s.output_w = w;
  return s;
}

AugParams sample_aug_params(const AugmentationSpec& spec, const Shape& image_shape, AugSeed seed) {
  spec.validate();
  if (image_shape.size() != 3) throw DimensionError("augment expects a CxHxW image");
  const std::size_t c = image_shape[0], h = image_shape[1], w = image_shape[2];
  Rng rng(derive_seed(seed.seed, seed.stream_id));

  AugParams p;
  // Fixed draw order regardless of which gates fire.
  const double scale = rng.uniform(spec.crop_scale_lo, spec.crop_scale_hi);
  const double side = std::sqrt(scale);
  const double ch = std::round(static_cast<double>(h) * side);
  const double cw = std::round(static_cast<double>(w) * side);
  if (ch < 1.0 || cw < 1.0) {
    throw ParameterError("crop window of " + std::to_string(ch) + "x" + std::to_string(cw) +
                         " px is degenerate");
  }
  p.crop_h = std::min(h, static_cast<std::size_t>(ch));
  p.crop_w = std::min(w, static_cast<std::size_t>(cw));
  p.crop_y = static_cast<std::size_t>(rng.below(h - p.crop_h + 1));
  p.crop_x = static_cast<std::size_t>(rng.below(w - p.crop_w + 1));
  p.flip_h = rng.bernoulli(spec.flip_h_prob);
  p.flip_v = rng.bernoulli(spec.flip_v_prob);
  const bool rotate = rng.bernoulli(spec.rot90_prob);
  const int turns = 1 + static_cast<int>(rng.below(3));
  p.quarter_turns = rotate ? turns : 0;
  p.channel_scale.resize(c);
  p.channel_shift.resize(c);
  const double s = spec.jitter_strength;
  for (std::size_t i = 0; i < c; ++i) {
    p.channel_scale[i] = rng.uniform(1.0 - s, 1.0 + s);
    p.channel_shift[i] = rng.uniform(-s, s);
  }
  if (s == 0.0) {
    std::fill(p.channel_scale.begin(), p.channel_scale.end(), 1.0);
    std::fill(p.channel_shift.begin(), p.channel_shift.end(), 0.0);
  }
  return p;
}

Tensor apply_aug_params(const AugmentationSpec& spec, const AugParams& p, const Tensor& image) {
  require_image(image, "augment");
  const std::size_t c = image.dim(0);
  if (c != 1 && c != 3) throw DimensionError("augment expects 1 or 3 channels, got " + std::to_string(c));
  if (p.channel_scale.size() != c) throw DimensionError("augmentation parameters sampled for another channel count");
  Tensor out = crop(image, p.crop_y, p.crop_x, p.crop_h, p.crop_w);
  out = resize_bilinear(out, spec.output_h, spec.output_w);
  if (p.flip_h) out = flip_horizontal(out);
  if (p.flip_v) out = flip_vertical(out);
  for (int t = 0; t < p.quarter_turns; ++t) out = rotate90(out);
  const std::size_t plane = out.dim(1) * out.dim(2);
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t ch = i / plane;
    const double v = d[i] * p.channel_scale[ch] + p.channel_shift[ch];
    d[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

Tensor augment(const AugmentationSpec& spec, const Tensor& image, AugSeed seed) {
  require_image(image, "augment");
  return apply_aug_params(spec, sample_aug_params(spec, image.shape(), seed), image);
}

std::pair<Tensor, Tensor> make_pair(const AugmentationSpec& spec, const Tensor& image,
                                    std::uint64_t base_seed, std::uint64_t sample_index) {
  if (sample_index == 0) throw ParameterError("make_pair sample index is 1-based");
  return {augment(spec, image, {base_seed, 2 * sample_index - 1}),
          augment(spec, image, {base_seed, 2 * sample_index})};
}

Tensor crop(const Tensor& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  require_image(image, "crop");
  const std::size_t c = image.dim(0), ih = image.dim(1), iw = image.dim(2);
  if (h == 0 || w == 0 || y0 + h > ih || x0 + w > iw) {
    throw DimensionError("crop window out of bounds for " + shape_str(image.shape()));
  }
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out[(ch * h + y) * w + x] = image[(ch * ih + y0 + y) * iw + x0 + x];
      }
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& image, std::size_t h, std::size_t w) {
  require_image(image, "resize_bilinear");
  if (h == 0 || w == 0) throw DimensionError("resize target must be positive");
  const std::size_t c = image.dim(0), ih = image.dim(1), iw = image.dim(2);
  if (h == ih && w == iw) return image;
  auto source_coord = [](std::size_t i, std::size_t out_n, std::size_t in_n) {
    if (out_n == 1) return 0.5 * static_cast<double>(in_n - 1);
    return static_cast<double>(i) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1);
  };
  Tensor out({c, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    const double sy = source_coord(y, h, ih);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, ih - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double sx = source_coord(x, w, iw);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, iw - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* plane = image.data().data() + ch * ih * iw;
        const double top = std::lerp(plane[y0 * iw + x0], plane[y0 * iw + x1], fx);
        const double bottom = std::lerp(plane[y1 * iw + x0], plane[y1 * iw + x1], fx);
        out[(ch * h + y) * w + x] = std::lerp(top, bottom, fy);
      }
    }
  }
  return out;
}

Tensor flip_horizontal(const Tensor& image) {
  require_image(image, "flip_horizontal");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        out[(ch * h + y) * w + x] = image[(ch * h + y) * w + (w - 1 - x)];
  return out;
}

Tensor flip_vertical(const Tensor& image) {
  require_image(image, "flip_vertical");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        out[(ch * h + y) * w + x] = image[(ch * h + (h - 1 - y)) * w + x];
  return out;
}

Tensor rotate90(const Tensor& image) {
  require_image(image, "rotate90");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  // out[y][x] = in[x][w-1-y]; output is w x h.
  Tensor out({c, w, h});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < w; ++y)
      for (std::size_t x = 0; x < h; ++x)
        out[(ch * w + y) * h + x] = image[(ch * h + x) * w + (w - 1 - y)];
  return out;
}

}  // namespace synthlabel

namespace synthlabel {

KeyValues AugmentationSpec::to_kv() const {
  KeyValues kv;
  kv.set("crop_scale_lo", crop_scale_lo);
  kv.set("crop_scale_hi", crop_scale_hi);
  kv.set("flip_h_prob", flip_h_prob);
  kv.set("flip_v_prob", flip_v_prob);
  kv.set("rot90_prob", rot90_prob);
  kv.set("jitter_strength", jitter_strength);
  kv.set("output_h", std::uint64_t{output_h});
  kv.set("output_w", std::uint64_t{output_w});
  return kv;
}

AugmentationSpec AugmentationSpec::from_kv(const KeyValues& kv) {
  AugmentationSpec s;
  s.crop_scale_lo = kv.get_double("crop_scale_lo");
  s.crop_scale_hi = kv.get_double("crop_scale_hi");
  s.flip_h_prob = kv.get_double("flip_h_prob");
  s.flip_v_prob = kv.get_double("flip_v_prob");
  s.rot90_prob = kv.get_double("rot90_prob");
  s.jitter_strength = kv.get_double("jitter_strength");
  s.output_h = kv.get_u64("output_h");
  s.output_w = kv.get_u64("output_w");
  s.validate();
  return s;
}

}  // namespace synthlabel
