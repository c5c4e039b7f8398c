#pragma once

// Downstream stages: embedding, wrapper fit, synthetic labeling, inductive
// classifier training and the transfer workflow.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "synthlabel/augment.hpp"
#include "synthlabel/contrastive.hpp"
#include "synthlabel/convnet.hpp"
#include "synthlabel/data.hpp"
#include "synthlabel/encoder.hpp"
#include "synthlabel/labels.hpp"
#include "synthlabel/metrics.hpp"
#include "synthlabel/wrappers.hpp"

namespace synthlabel {

// --- Embeddings -----------------------------------------------------------------

/// Rows of h for every sample, in sample order. Images whose spatial size
/// differs from the encoder input are resized first.
Tensor embed_all(const EncoderModel& encoder, const SampleSet& samples);

/// prefix.tnsr (N x D) and prefix.ids.csv (header sample_id), same row order.
void export_embeddings(const std::filesystem::path& prefix, const EncoderModel& encoder,
                       const SampleSet& samples);
struct EmbeddingTable {
  std::vector<std::string> ids;
  Tensor matrix;
};
EmbeddingTable read_embeddings(const std::filesystem::path& prefix);

// --- Wrapper ------------------------------------------------------------------------

struct WrapperConfig {
  WrapperKind kind = WrapperKind::svm;
  SvmParams svm;
  std::size_t knn_k = 5;
  LogRegParams logreg;

  void validate() const;
  KeyValues to_kv() const;
  static WrapperConfig from_kv(const KeyValues& kv);
};

/// A wrapper together with the hash of the encoder whose embeddings it was
/// fitted on.
struct FittedWrapper {
  WrapperModel model;
  std::string encoder_hash;

  /// "<kind>:<wrapper hash>"
  std::string provenance() const;
};

/// Fit on embeddings of a fully labeled binary set (class ids 0/1).
FittedWrapper fit_wrapper(const EncoderModel& encoder, const SampleSet& labeled, const WrapperConfig& cfg);
FittedWrapper fit_wrapper_on(const Tensor& embeddings, std::span<const int> labels,
                             const std::string& encoder_hash, const WrapperConfig& cfg);

/// Class id (0/1) and score for one embedding.
Prediction wrapper_predict(const WrapperModel& model, std::span<const double> h);

void save_fitted_wrapper(const std::filesystem::path& path, const FittedWrapper& wrapper);
FittedWrapper load_fitted_wrapper(const std::filesystem::path& path);

/// One label per unlabeled sample, predicted from its embedding without
/// augmentation; entries sorted by sample id. Throws ProvenanceError when the
/// wrapper was fitted on another encoder unless `allow_mismatch` is set.
SyntheticLabelSet synthesize_labels(const EncoderModel& encoder, const FittedWrapper& wrapper,
                                    const SampleSet& unlabeled, bool allow_mismatch = false);

// --- Inductive classifier ---------------------------------------------------------

struct InductiveConfig {
  std::vector<ConvLayerSpec> conv_layers{{8, 3, 1, 2}, {16, 3, 1, 2}, {32, 3, 1, 2}};
  /// Training length in SGD steps, so classifiers trained on sets of
  /// different size receive the same number of updates.
  std::size_t steps = 600;
  std::size_t batch_size = 32;
  double learning_rate = 0.02;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  /// Off by default: in calibration runs augmentation narrowed the margin of
  /// the pipeline over the supervised baseline.
  bool augment = false;
  /// Per-image channel standardisation before the conv stack.
  bool standardize_input = true;
  // Lossless transforms only: crop-and-resize smooths pixel noise, which
  // would shift the training inputs away from the raw test images.
  AugmentationSpec augmentation{1.0, 1.0, 0.5, 0.5, 0.5, 0.0, 32, 32};

  void validate() const;
  KeyValues to_kv() const;
  static InductiveConfig from_kv(const KeyValues& kv);
};

struct LabelSource {
  std::string sample_id;
  std::string source;  // "real" or "synthetic:<kind>:<hash>"
};

class InductiveClassifier {
 public:
  InductiveClassifier() = default;
  InductiveClassifier(InductiveConfig config, ConvNet net, std::vector<std::string> class_names);

  const InductiveConfig& config() const { return config_; }
  const ConvNet& net() const { return net_; }
  ConvNet& net() { return net_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  /// Mean cross-entropy per pass over the training union.
  std::vector<double> loss_trace;
  std::vector<LabelSource> provenance;

  int predict(const Tensor& image) const;
  std::vector<int> predict(const SampleSet& samples) const;

 private:
  InductiveConfig config_;
  ConvNet net_;
  std::vector<std::string> class_names_;
};

/// Softmax cross-entropy with momentum SGD on labeled plus synthetically
/// labeled samples, shuffled together with equal weight. An empty synthetic
/// set gives the supervised baseline. Throws DivergedTrainingError carrying
/// the loss trace so far on a non-finite loss.
InductiveClassifier train_inductive(const SampleSet& labeled, const SampleSet& unlabeled,
                                    const SyntheticLabelSet& synthetic, const InductiveConfig& cfg);

void save_inductive(const std::filesystem::path& path, const InductiveClassifier& classifier);
InductiveClassifier load_inductive(const std::filesystem::path& path);
void write_provenance_csv(const std::filesystem::path& path, const std::vector<LabelSource>& sources);

// --- Orchestration --------------------------------------------------------------------

/// Per-stage seeds fanned out from one master seed with derive_seed.
struct StageSeeds {
  std::uint64_t split = 0;
  std::uint64_t encoder_init = 0;
  std::uint64_t pretrain = 0;
  std::uint64_t inductive = 0;

  static StageSeeds from_master(std::uint64_t master);
};

struct DownstreamResult {
  FittedWrapper wrapper;
  SyntheticLabelSet synthetic;
  InductiveClassifier classifier;
  MetricsReport wrapper_test;     // wrapper applied to test embeddings
  MetricsReport classifier_test;  // inductive classifier on test images
};

/// Embed -> fit wrapper -> synthesize labels -> train -> evaluate on `test`.
/// Used unchanged for transfer; with the encoder pretrained on the same data
/// it is the ordinary pipeline.
DownstreamResult transfer(const EncoderModel& encoder, const SampleSet& labeled, const SampleSet& unlabeled,
                          const SampleSet& test, const WrapperConfig& wrapper_cfg,
                          const InductiveConfig& inductive_cfg, int positive_class = 0);

}  // namespace synthlabel
