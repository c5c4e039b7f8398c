#include "synthlabel/experiment.hpp"

#include <algorithm>
#include <map>

#include "synthlabel/error.hpp"

namespace synthlabel {

SampleSet load_dataset(const RunConfig& cfg) {
  if (cfg.dataset.kind == DatasetConfig::Kind::procedural) return generate_procedural(cfg.dataset.procedural);
  std::optional<std::filesystem::path> csv;
  if (!cfg.dataset.labels_csv.empty()) csv = cfg.dataset.labels_csv;
  return load_image_dir(cfg.dataset.image_dir, csv);
}

DataSplit make_split(const RunConfig& cfg) { return split(load_dataset(cfg), cfg.split_spec()); }

std::vector<Tensor> pretraining_images(const DataSplit& split) {
  std::vector<const Sample*> all;
  for (const auto& s : split.labeled_train.samples()) all.push_back(&s);
  for (const auto& s : split.unlabeled_train.samples()) all.push_back(&s);
  std::sort(all.begin(), all.end(), [](const Sample* a, const Sample* b) { return a->id < b->id; });
  std::vector<Tensor> images;
  images.reserve(all.size());
  for (const Sample* s : all) images.push_back(s->image);
  return images;
}

PretrainResult run_pretrain(const RunConfig& cfg, const DataSplit& split, const CheckpointFn& on_checkpoint) {
  const auto model = EncoderModel::init(cfg.encoder, cfg.stage_seeds().encoder_init);
  return pretrain(pretraining_images(split), cfg.augment, model, cfg.train_config(), on_checkpoint);
}

InductiveClassifier train_baseline(const RunConfig& cfg, const DataSplit& split) {
  return train_inductive(split.labeled_train, split.unlabeled_train, SyntheticLabelSet{}, cfg.inductive_config());
}

ExperimentResult run_downstream(const RunConfig& cfg, const DataSplit& split, PretrainResult pretrain) {
  ExperimentResult r;
  r.pretrain = std::move(pretrain);
  r.pipeline = transfer(r.pretrain.model, split.labeled_train, split.unlabeled_train, split.test, cfg.wrapper,
                        cfg.inductive_config(), cfg.positive_class);
  // Fully supervised splits have nothing to label.
  if (!r.pipeline.synthetic.empty())
    r.synthetic_quality = synthetic_label_quality(r.pipeline.synthetic, split.unlabeled_truth, cfg.positive_class);
  r.baseline = train_baseline(cfg, split);
  r.baseline_test = evaluate(r.baseline.predict(split.test), split.test.labels(), cfg.positive_class);
  return r;
}

ExperimentResult run_experiment(const RunConfig& cfg) {
  const DataSplit s = make_split(cfg);
  return run_downstream(cfg, s, run_pretrain(cfg, s));
}

double majority_rate(const SampleSet& labeled) {
  const auto labels = labeled.labels();
  if (labels.empty()) throw DegenerateInputError("majority_rate of an empty set");
  std::map<int, std::size_t> counts;
  for (int y : labels) ++counts[y];
  std::size_t best = 0;
  for (const auto& [y, n] : counts) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

}  // namespace synthlabel
