#pragma once

#include <span>
#include <string>
#include <vector>

#include "synthlabel/data.hpp"
#include "synthlabel/labels.hpp"

namespace synthlabel {

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Undefined ratios (zero denominators) are reported as 0 with the matching
/// flag set, so aggregates never see NaN.
struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionMatrix confusion;
  std::size_t n_test = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  /// {"accuracy", "precision", "recall", "f1", "confusion" (2x2 row-major:
  /// [[tn, fp], [fn, tp]] with rows = truth), "n_test", "undefined"}
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
};

double f1_score(double precision, double recall);

MetricsReport evaluate(std::span<const int> predictions, std::span<const int> truth, int positive_class);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};

struct AggregateReport {
  MeanStd accuracy, precision, recall, f1;
  std::size_t runs = 0;
};

MeanStd mean_std(std::span<const double> values);
AggregateReport aggregate(std::span<const MetricsReport> reports);

/// "73.2 ± 0.7" style rendering; values are multiplied by `scale` first.
std::string format_mean_std(const MeanStd& v, double scale = 100.0, int decimals = 1);

/// Synthetic labels scored against the sealed ground truth of the unlabeled
/// partition.
MetricsReport synthetic_label_quality(const SyntheticLabelSet& synthetic, const SealedTruth& truth,
                                      int positive_class);

/// Plain-text table of reports (accuracy in percent at 1 d.p.).
std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace synthlabel
