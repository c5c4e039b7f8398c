#pragma once

// Whole-pipeline helpers driven by a RunConfig, shared by the CLI and the
// end-to-end tests.

#include <vector>

#include "synthlabel/config.hpp"

namespace synthlabel {

/// Dataset of the config: procedural or an image directory.
SampleSet load_dataset(const RunConfig& cfg);
DataSplit make_split(const RunConfig& cfg);

/// Images used for pretraining: labeled and unlabeled training samples in
/// sample-id order, so the set does not depend on labeled_fraction.
std::vector<Tensor> pretraining_images(const DataSplit& split);

PretrainResult run_pretrain(const RunConfig& cfg, const DataSplit& split, const CheckpointFn& on_checkpoint = {});

struct ExperimentResult {
  PretrainResult pretrain;
  DownstreamResult pipeline;
  InductiveClassifier baseline;
  MetricsReport baseline_test;
  MetricsReport synthetic_quality;
};

/// Baseline: the inductive classifier with the same config trained on the
/// real labels only.
InductiveClassifier train_baseline(const RunConfig& cfg, const DataSplit& split);

/// Downstream stages plus baseline for an already pretrained encoder.
ExperimentResult run_downstream(const RunConfig& cfg, const DataSplit& split, PretrainResult pretrain);
ExperimentResult run_experiment(const RunConfig& cfg);

/// Fraction of the most frequent label.
double majority_rate(const SampleSet& labeled);

}  // namespace synthlabel
