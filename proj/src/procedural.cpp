#include <algorithm>
#include <cmath>
#include <cstdio>

#include "synthlabel/data.hpp"
#include "synthlabel/error.hpp"
#include "synthlabel/parallel.hpp"
#include "synthlabel/rng.hpp"

namespace synthlabel {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Dot {
  double y, x, radius;
};

// Soft-edged disc coverage in [0, 1], stamped with max().
void stamp_dots(const std::vector<Dot>& dots, std::size_t size, std::vector<double>& mask) {
  const auto n = static_cast<double>(size);
  for (const auto& d : dots) {
    const double reach = d.radius + 1.0;
    const auto y0 = static_cast<long>(std::floor(std::max(0.0, d.y - reach)));
    const auto y1 = static_cast<long>(std::ceil(std::min(n - 1.0, d.y + reach)));
    const auto x0 = static_cast<long>(std::floor(std::max(0.0, d.x - reach)));
    const auto x1 = static_cast<long>(std::ceil(std::min(n - 1.0, d.x + reach)));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double dist = std::hypot(static_cast<double>(y) - d.y, static_cast<double>(x) - d.x);
        const double cover = std::clamp(d.radius + 0.5 - dist, 0.0, 1.0);
        auto& m = mask[static_cast<std::size_t>(y) * size + static_cast<std::size_t>(x)];
        m = std::max(m, cover);
      }
    }
  }
}

// Zero-mean, unit-variance Gaussian-blurred white noise.
std::vector<double> correlated_noise(std::size_t size, double sigma, Rng& rng) {
  const std::size_t radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  const std::size_t padded = size + 2 * radius;
  std::vector<double> white(padded * padded);
  for (auto& v : white) v = rng.normal();
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    const double t = static_cast<double>(i) - static_cast<double>(radius);
    kernel[i] = std::exp(-0.5 * t * t / (sigma * sigma));
    ksum += kernel[i];
  }
  for (auto& k : kernel) k /= ksum;
  std::vector<double> rows(size * padded, 0.0);
  for (std::size_t y = 0; y < padded; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * white[y * padded + x + k];
      rows[y * size + x] = acc;
    }
  std::vector<double> out(size * size, 0.0);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * rows[(y + k) * size + x];
      out[y * size + x] = acc;
    }
  double mean = 0.0, var = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(out.size());
  for (double v : out) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(out.size()));
  for (auto& v : out) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return out;
}

Tensor render(const ProceduralSpec& spec, int cls, Rng& rng) {
  const std::size_t size = spec.image_size;
  const auto n = static_cast<double>(size);

  // Shared appearance draws; the same sequence for both classes.
  const double base = rng.uniform(spec.base_lo, spec.base_hi);
  double color[3];
  for (auto& c : color) c = base + spec.tint * rng.uniform(-1.0, 1.0);
  const double contrast = rng.uniform(spec.contrast_lo, spec.contrast_hi);
  const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  const double spacing = rng.uniform(spec.spacing_lo, spec.spacing_hi);
  const double radius = rng.uniform(spec.radius_lo, std::min(spec.radius_hi, 0.45 * spacing));

  std::vector<double> canopy(size * size, 0.0);
  if (cls == 0) {
    // Rotated, jittered lattice of dots.
    std::vector<Dot> dots;
    const double angle = rng.uniform(0.0, kPi);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double py = rng.uniform(0.0, spacing), px = rng.uniform(0.0, spacing);
    const auto reach = static_cast<long>(std::ceil(1.5 * n / spacing)) + 1;
    for (long i = -reach; i <= reach; ++i) {
      for (long j = -reach; j <= reach; ++j) {
        const double u = static_cast<double>(i) * spacing, v = static_cast<double>(j) * spacing;
        const double jy = spec.position_jitter * spacing * rng.uniform(-1.0, 1.0);
        const double jx = spec.position_jitter * spacing * rng.uniform(-1.0, 1.0);
        const double r = radius * rng.uniform(0.8, 1.2);
        const double y = n / 2 + py + ca * u - sa * v + jy;
        const double x = n / 2 + px + sa * u + ca * v + jx;
        if (y < -r - 1 || y > n + r || x < -r - 1 || x > n + r) continue;
        dots.push_back({y, x, r});
      }
    }
    stamp_dots(dots, size, canopy);
  } else {
    // Irregular canopy: squashed correlated noise with blobs of roughly the
    // dot size.
    const auto blobs = correlated_noise(size, radius * rng.uniform(0.8, 1.2), rng);
    for (std::size_t i = 0; i < canopy.size(); ++i) canopy[i] = 0.5 * (1.0 + std::tanh(1.5 * blobs[i]));
  }
  // Centre the pattern so it does not move the mean brightness.
  double mean = 0.0;
  for (double v : canopy) mean += v;
  mean /= static_cast<double>(canopy.size());
  for (auto& v : canopy) v -= mean;

  const double sigma = spec.noise_corr_length * rng.uniform(0.7, 1.3);
  const auto texture = correlated_noise(size, sigma, rng);

  Tensor image({3, size, size});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < size * size; ++i) {
      const double v = color[c] + sign * contrast * canopy[i] + spec.texture_strength * contrast * texture[i] +
                       spec.pixel_noise * rng.normal();
      image[c * size * size + i] = std::clamp(v, 0.0, 1.0);
    }
  }
  return image;
}

}  // namespace

void ProceduralSpec::validate() const {
  if (n_per_class == 0) throw ParameterError("n_per_class must be positive");
  if (image_size < 8) throw ParameterError("image_size must be at least 8");
  if (!(spacing_lo > 0.0 && spacing_lo <= spacing_hi)) throw ParameterError("invalid grid spacing range");
  if (!(radius_lo > 0.0 && radius_lo <= radius_hi)) throw ParameterError("invalid dot radius range");
  if (radius_hi >= spacing_lo || radius_lo >= 0.45 * spacing_lo) {
    throw ParameterError("dot radius must be smaller than the grid spacing");
  }
  if (!(base_lo >= 0.0 && base_lo <= base_hi && base_hi <= 1.0)) throw ParameterError("invalid base colour range");
  if (!(contrast_lo >= 0.0 && contrast_lo <= contrast_hi)) throw ParameterError("invalid contrast range");
  if (!(noise_corr_length > 0.0)) throw ParameterError("noise correlation length must be positive");
  if (position_jitter < 0.0 || tint < 0.0 || pixel_noise < 0.0 || texture_strength < 0.0) {
    throw ParameterError("jitter, tint, texture strength and pixel noise must be >= 0");
  }
}

KeyValues ProceduralSpec::to_kv() const {
  KeyValues kv;
  kv.set("n_per_class", std::uint64_t{n_per_class});
  kv.set("image_size", std::uint64_t{image_size});
  kv.set("seed", seed);
  kv.set("spacing_lo", spacing_lo);
  kv.set("spacing_hi", spacing_hi);
  kv.set("radius_lo", radius_lo);
  kv.set("radius_hi", radius_hi);
  kv.set("position_jitter", position_jitter);
  kv.set("noise_corr_length", noise_corr_length);
  kv.set("base_lo", base_lo);
  kv.set("base_hi", base_hi);
  kv.set("contrast_lo", contrast_lo);
  kv.set("contrast_hi", contrast_hi);
  kv.set("tint", tint);
  kv.set("texture_strength", texture_strength);
  kv.set("pixel_noise", pixel_noise);
  return kv;
}

ProceduralSpec ProceduralSpec::from_kv(const KeyValues& kv) {
  ProceduralSpec s;
  s.n_per_class = kv.get_u64("n_per_class");
  s.image_size = kv.get_u64("image_size");
  s.seed = kv.get_u64("seed");
  s.spacing_lo = kv.get_double("spacing_lo");
  s.spacing_hi = kv.get_double("spacing_hi");
  s.radius_lo = kv.get_double("radius_lo");
  s.radius_hi = kv.get_double("radius_hi");
  s.position_jitter = kv.get_double("position_jitter");
  s.noise_corr_length = kv.get_double("noise_corr_length");
  s.base_lo = kv.get_double("base_lo");
  s.base_hi = kv.get_double("base_hi");
  s.contrast_lo = kv.get_double("contrast_lo");
  s.contrast_hi = kv.get_double("contrast_hi");
  s.tint = kv.get_double("tint");
  s.texture_strength = kv.get_double("texture_strength");
  s.pixel_noise = kv.get_double("pixel_noise");
  s.validate();
  return s;
}

ProceduralSpec ProceduralSpec::variant_b() const {
  ProceduralSpec b = *this;
  b.spacing_lo = spacing_lo * 1.2;
  b.spacing_hi = spacing_hi * 1.2;
  b.radius_lo = radius_lo * 1.2;
  b.radius_hi = radius_hi * 1.2;
  b.base_lo = std::min(1.0, base_lo + 0.1);
  b.base_hi = std::min(1.0, base_hi + 0.1);
  b.noise_corr_length = noise_corr_length * 1.25;
  b.seed = derive_seed(seed, "variant-b");
  return b;
}

SampleSet generate_procedural(const ProceduralSpec& spec) {
  spec.validate();
  const std::size_t total = 2 * spec.n_per_class;
  std::vector<Sample> samples(total);
  parallel::parallel_for(total, [&](std::size_t k) {
    const int cls = k < spec.n_per_class ? 0 : 1;
    const std::size_t index = k % spec.n_per_class;
    Rng rng(derive_seed(spec.seed, k));
    char id[32];
    std::snprintf(id, sizeof(id), "proc-c%d-%06zu", cls, index);
    samples[k] = Sample{id, render(spec, cls, rng), cls};
  });
  return SampleSet(std::move(samples), {"plantation", "forest"});
}

}  // namespace synthlabel
