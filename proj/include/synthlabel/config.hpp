#pragma once

// Run configuration: a sectioned key = value text file.
//
//   # comment
//   [section]
//   key = value
//
// Missing keys take their defaults; unknown sections and keys are errors.
// Stage seeds are not configured directly but derived from [run] seed.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "synthlabel/augment.hpp"
#include "synthlabel/contrastive.hpp"
#include "synthlabel/data.hpp"
#include "synthlabel/encoder.hpp"
#include "synthlabel/pipeline.hpp"

namespace synthlabel {

struct DatasetConfig {
  enum class Kind { procedural, image_dir };
  Kind kind = Kind::procedural;
  ProceduralSpec procedural;
  std::string image_dir;   // image_dir only
  std::string labels_csv;  // image_dir only, may be empty
};

struct RunConfig {
  std::uint64_t seed = 1;
  int positive_class = 0;
  DatasetConfig dataset;
  SplitSpec split;
  AugmentationSpec augment;
  EncoderConfig encoder;
  TrainConfig train;
  WrapperConfig wrapper;
  InductiveConfig inductive;

  /// Cross-section checks (e.g. augmentation output matches encoder input)
  /// on top of each section's own validation.
  void validate() const;

  using Sections = std::map<std::string, KeyValues>;
  Sections sections() const;
  static RunConfig from_sections(const Sections& sections);

  /// Every key with its effective value, sections and keys sorted.
  std::string canonical_text() const;
  std::string hash() const;
  /// Hash over a subset of sections, used to key individual stage outputs.
  std::string sections_hash(const std::vector<std::string>& names) const;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  StageSeeds stage_seeds() const { return StageSeeds::from_master(seed); }
  // Section values with the derived stage seeds filled in.
  SplitSpec split_spec() const;
  TrainConfig train_config() const;
  InductiveConfig inductive_config() const;
};

/// Canonical text of the default configuration.
std::string default_config_text();

}  // namespace synthlabel
