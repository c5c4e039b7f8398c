#include "synthlabel/metrics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "synthlabel/error.hpp"
#include "synthlabel/kv.hpp"

namespace synthlabel {

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

MetricsReport evaluate(std::span<const int> predictions, std::span<const int> truth, int positive_class) {
  if (predictions.size() != truth.size()) {
    throw DimensionError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw DimensionError("evaluate needs at least one sample");
  MetricsReport r;
  auto& cm = r.confusion;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool pred_pos = predictions[i] == positive_class;
    const bool true_pos = truth[i] == positive_class;
    if (pred_pos && true_pos) ++cm.tp;
    else if (pred_pos) ++cm.fp;
    else if (true_pos) ++cm.fn;
    else ++cm.tn;
  }
  r.n_test = truth.size();
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(r.n_test);
  if (cm.tp + cm.fp > 0) r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  else r.precision_undefined = true;
  if (cm.tp + cm.fn > 0) r.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  else r.recall_undefined = true;
  if (r.precision + r.recall > 0.0) r.f1 = f1_score(r.precision, r.recall);
  else r.f1_undefined = true;
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["confusion"] = {{confusion.tn, confusion.fp}, {confusion.fn, confusion.tp}};
  j["n_test"] = n_test;
  j["undefined"] = {{"precision", precision_undefined}, {"recall", recall_undefined}, {"f1", f1_undefined}};
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at(1).at(1).get<std::size_t>(), c.at(0).at(1).get<std::size_t>(),
                   c.at(0).at(0).get<std::size_t>(), c.at(1).at(0).get<std::size_t>()};
    r.n_test = j.at("n_test").get<std::size_t>();
    if (j.contains("undefined")) {
      r.precision_undefined = j["undefined"].value("precision", false);
      r.recall_undefined = j["undefined"].value("recall", false);
      r.f1_undefined = j["undefined"].value("f1", false);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed metrics report: ") + e.what());
  }
}

MeanStd mean_std(std::span<const double> values) {
  if (values.size() < 2) throw ParameterError("aggregation needs at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

AggregateReport aggregate(std::span<const MetricsReport> reports) {
  if (reports.size() < 2) throw ParameterError("aggregate needs at least 2 reports");
  std::vector<double> acc, prec, rec, f1;
  for (const auto& r : reports) {
    acc.push_back(r.accuracy);
    prec.push_back(r.precision);
    rec.push_back(r.recall);
    f1.push_back(r.f1);
  }
  return {mean_std(acc), mean_std(prec), mean_std(rec), mean_std(f1), reports.size()};
}

std::string format_mean_std(const MeanStd& v, double scale, int decimals) {
  return fmt::format("{:.{}f} ± {:.{}f}", v.mean * scale, decimals, v.std * scale, decimals);
}

MetricsReport synthetic_label_quality(const SyntheticLabelSet& synthetic, const SealedTruth& truth,
                                      int positive_class) {
  const auto& hidden = EvaluationHarness::unseal(truth);
  std::vector<int> pred, gold;
  for (const auto& e : synthetic.entries) {
    const auto it = hidden.find(e.sample_id);
    if (it == hidden.end()) {
      throw ParameterError("sealed truth has no label for synthetic id '" + e.sample_id + "'");
    }
    pred.push_back(e.label);
    gold.push_back(it->second);
  }
  return evaluate(pred, gold, positive_class);
}

std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out = fmt::format("{:<28} {:>9} {:>9} {:>9} {:>9}\n", "Model", "Accuracy", "Precision",
                                "Recall", "F1-score");
  for (const auto& [name, r] : rows) {
    out += fmt::format("{:<28} {:>9.1f} {:>9.3f} {:>9.3f} {:>9.3f}\n", name, 100.0 * r.accuracy,
                       r.precision, r.recall, r.f1);
  }
  return out;
}

void SyntheticLabelSet::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "sample_id,label,score,provenance\n";
  for (const auto& e : entries) {
    out << e.sample_id << ',' << e.label << ',' << format_double(e.score) << ',' << e.provenance << '\n';
  }
}

SyntheticLabelSet SyntheticLabelSet::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "sample_id,label,score,provenance") throw IoError(path.string() + ": bad header");
  SyntheticLabelSet set;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, label, score, prov;
    if (!std::getline(ss, id, ',') || !std::getline(ss, label, ',') || !std::getline(ss, score, ',') ||
        !std::getline(ss, prov)) {
      throw IoError(path.string() + ": malformed row '" + line + "'");
    }
    set.entries.push_back({id, static_cast<int>(parse_u64(label, path.string())),
                           parse_double(score, path.string()), prov});
  }
  return set;
}

}  // namespace synthlabel
