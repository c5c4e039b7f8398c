#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace synthlabel {

struct SyntheticLabel {
  std::string sample_id;
  int label = 0;
  double score = 0.0;
  std::string provenance;  // "<wrapper kind>:<wrapper hash>"
};

/// Wrapper predictions for the unlabeled partition, ordered by sample id.
struct SyntheticLabelSet {
  std::vector<SyntheticLabel> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }

  /// CSV with header sample_id,label,score,provenance.
  void write_csv(const std::filesystem::path& path) const;
  static SyntheticLabelSet read_csv(const std::filesystem::path& path);

  bool operator==(const SyntheticLabelSet&) const = default;
};

inline bool operator==(const SyntheticLabel& a, const SyntheticLabel& b) {
  return a.sample_id == b.sample_id && a.label == b.label && a.score == b.score &&
         a.provenance == b.provenance;
}

}  // namespace synthlabel
