#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synthlabel/kv.hpp"
#include "synthlabel/tensor.hpp"

namespace synthlabel {

struct Sample {
  std::string id;
  Tensor image;  // C x H x W, values in [0, 1]
  std::optional<int> label;
};

/// Immutable collection of same-shaped images with unique ids.
class SampleSet {
 public:
  SampleSet() = default;
  /// Validates unique ids, a common image shape, pixel range and label range.
  SampleSet(std::vector<Sample> samples, std::vector<std::string> class_names);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  /// Shape shared by all images; empty for an empty set.
  Shape image_shape() const;

  bool fully_labeled() const;
  std::vector<Tensor> images() const;
  /// Labels of a fully labeled set; throws otherwise.
  std::vector<int> labels() const;
  std::optional<std::size_t> find(const std::string& id) const;

 private:
  std::vector<Sample> samples_;
  std::vector<std::string> class_names_;
};

/// Concatenation; both sets must share image shape and class names.
SampleSet merge(const SampleSet& a, const SampleSet& b);

/// Ground-truth labels of the unlabeled partition. Pipeline code can hold and
/// pass one around but cannot read it; only EvaluationHarness can.
class SealedTruth {
 public:
  SealedTruth() = default;
  std::size_t size() const { return labels_.size(); }

 private:
  friend class EvaluationHarness;
  explicit SealedTruth(std::map<std::string, int> labels) : labels_(std::move(labels)) {}
  std::map<std::string, int> labels_;
};

class EvaluationHarness {
 public:
  static SealedTruth seal(std::map<std::string, int> labels) { return SealedTruth(std::move(labels)); }
  static const std::map<std::string, int>& unseal(const SealedTruth& truth) { return truth.labels_; }
  static void save(const std::filesystem::path& path, const SealedTruth& truth);
  static SealedTruth load(const std::filesystem::path& path);
};

struct SplitSpec {
  double labeled_fraction = 0.1;
  double test_fraction = 1.0 / 6.0;  // 1000 train / 200 test at the default dataset size
  std::uint64_t seed = 1;
  bool balance = true;

  KeyValues to_kv() const;
  static SplitSpec from_kv(const KeyValues& kv);
};

struct DataSplit {
  SampleSet labeled_train;
  SampleSet unlabeled_train;  // labels removed
  SampleSet test;
  SealedTruth unlabeled_truth;
};

/// Test set first (per-class balanced when spec.balance), then a balanced
/// labeled_fraction of the remainder; the rest loses its labels.
DataSplit split(const SampleSet& set, const SplitSpec& spec);

// --- Procedural two-class texture generator ------------------------------------

/// Class 0 ("plantation"): a jittered, rotated lattice of soft dots.
/// Class 1 ("forest"): squashed correlated noise with blobs of dot size.
/// Both patterns are centred on a shared random base colour and overlaid
/// with a coarser background texture, so mean brightness does not separate
/// the classes.
struct ProceduralSpec {
  std::size_t n_per_class = 600;
  std::size_t image_size = 32;
  std::uint64_t seed = 1;
  double spacing_lo = 5.0;
  double spacing_hi = 9.0;
  double radius_lo = 1.0;
  double radius_hi = 2.2;
  double position_jitter = 0.25;  // fraction of spacing
  double noise_corr_length = 3.0;  // background texture
  double base_lo = 0.25;
  double base_hi = 0.75;
  double contrast_lo = 0.20;
  double contrast_hi = 0.45;
  double texture_strength = 0.2;  // background amplitude relative to contrast
  double tint = 0.15;  // per-channel colour variation of the base
  double pixel_noise = 0.1;

  void validate() const;
  KeyValues to_kv() const;
  static ProceduralSpec from_kv(const KeyValues& kv);
  /// Shifted texture parameters used for transfer experiments.
  ProceduralSpec variant_b() const;
};

SampleSet generate_procedural(const ProceduralSpec& spec);

// --- Image directories ---------------------------------------------------------

/// Reads *.png from `dir` (8-bit gray or RGB) sorted by filename. Rows of the
/// optional `filename,label` CSV attach labels; unlisted files are
/// unlabeled. If `class_names` is empty it is derived from the CSV.
SampleSet load_image_dir(const std::filesystem::path& dir,
                         const std::optional<std::filesystem::path>& labels_csv,
                         std::vector<std::string> class_names = {});

Tensor read_png(const std::filesystem::path& path);
/// Quantises to 8 bits (round(v * 255)).
void write_png(const std::filesystem::path& path, const Tensor& image);

/// prefix.tnsr (N x C x H x W), prefix.csv (sample_id,label), prefix.classes.
void save_sample_set(const std::filesystem::path& prefix, const SampleSet& set);
SampleSet load_sample_set(const std::filesystem::path& prefix);

}  // namespace synthlabel
