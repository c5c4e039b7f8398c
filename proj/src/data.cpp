#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "synthlabel/data.hpp"
#include "synthlabel/error.hpp"
#include "synthlabel/rng.hpp"
#include "synthlabel/tnsr_io.hpp"

namespace synthlabel {

SampleSet::SampleSet(std::vector<Sample> samples, std::vector<std::string> class_names)
    : samples_(std::move(samples)), class_names_(std::move(class_names)) {
  std::set<std::string> ids;
  for (const auto& s : samples_) {
    if (!ids.insert(s.id).second) throw ParameterError("duplicate sample id '" + s.id + "'");
    if (s.image.rank() != 3) throw DimensionError("sample '" + s.id + "' is not a CxHxW image");
    if (s.image.shape() != samples_.front().image.shape()) {
      throw DimensionError("sample '" + s.id + "' has shape " + shape_str(s.image.shape()) +
                           ", expected " + shape_str(samples_.front().image.shape()));
    }
    for (double v : s.image.data()) {
      if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("sample '" + s.id + "' has pixels outside [0, 1]");
    }
    if (s.label && (*s.label < 0 || static_cast<std::size_t>(*s.label) >= class_names_.size())) {
      throw ParameterError("sample '" + s.id + "' label out of range");
    }
  }
}

Shape SampleSet::image_shape() const {
  return samples_.empty() ? Shape{} : samples_.front().image.shape();
}

bool SampleSet::fully_labeled() const {
  return std::all_of(samples_.begin(), samples_.end(), [](const Sample& s) { return s.label.has_value(); });
}

std::vector<Tensor> SampleSet::images() const {
  std::vector<Tensor> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.image);
  return out;
}

std::vector<int> SampleSet::labels() const {
  std::vector<int> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) {
    if (!s.label) throw ParameterError("sample '" + s.id + "' has no label");
    out.push_back(*s.label);
  }
  return out;
}

std::optional<std::size_t> SampleSet::find(const std::string& id) const {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].id == id) return i;
  }
  return std::nullopt;
}

SampleSet merge(const SampleSet& a, const SampleSet& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.class_names() != b.class_names()) throw ParameterError("merge: class names differ");
  std::vector<Sample> all = a.samples();
  all.insert(all.end(), b.samples().begin(), b.samples().end());
  return SampleSet(std::move(all), a.class_names());
}

void EvaluationHarness::save(const std::filesystem::path& path, const SealedTruth& truth) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "sample_id,label\n";
  for (const auto& [id, label] : truth.labels_) out << id << ',' << label << '\n';
}

SealedTruth EvaluationHarness::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "sample_id,label") throw IoError(path.string() + ": bad header");
  std::map<std::string, int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(path.string() + ": malformed row");
    labels[line.substr(0, comma)] = static_cast<int>(parse_u64(line.substr(comma + 1), path.string()));
  }
  return SealedTruth(std::move(labels));
}

KeyValues SplitSpec::to_kv() const {
  KeyValues kv;
  kv.set("labeled_fraction", labeled_fraction);
  kv.set("test_fraction", test_fraction);
  kv.set("seed", seed);
  kv.set("balance", balance);
  return kv;
}

SplitSpec SplitSpec::from_kv(const KeyValues& kv) {
  SplitSpec s;
  s.labeled_fraction = kv.get_double("labeled_fraction");
  s.test_fraction = kv.get_double("test_fraction");
  s.seed = kv.get_u64("seed");
  s.balance = kv.get_bool("balance");
  return s;
}

DataSplit split(const SampleSet& set, const SplitSpec& spec) {
  if (!(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0)) {
    throw ParameterError("labeled_fraction must lie in (0, 1]");
  }
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw ParameterError("test_fraction must lie in (0, 1)");
  }
  if (!set.fully_labeled()) throw ParameterError("split needs a fully labeled set");
  const std::size_t classes = set.class_names().size();
  const std::size_t n = set.size();

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(*set[i].label)].push_back(i);
  Rng rng(spec.seed);
  for (auto& idx : by_class) rng.shuffle(idx.begin(), idx.end());

  // Draw `count_for(class)` from the front of each class pool.
  std::vector<bool> taken(n, false);
  auto draw = [&](auto&& count_for) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < classes; ++c) {
      std::size_t want = count_for(c);
      for (std::size_t i : by_class[c]) {
        if (want == 0) break;
        if (taken[i]) continue;
        taken[i] = true;
        out.push_back(i);
        --want;
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  auto remaining = [&](std::size_t c) {
    return static_cast<std::size_t>(
        std::count_if(by_class[c].begin(), by_class[c].end(), [&](std::size_t i) { return !taken[i]; }));
  };

  std::vector<std::size_t> test_idx;
  if (spec.balance) {
    // Rounded so that fractions like 1/6 are not truncated by one ulp.
    const auto per_class = static_cast<std::size_t>(
        std::llround(spec.test_fraction * static_cast<double>(n) / static_cast<double>(classes)));
    test_idx = draw([&](std::size_t c) { return std::min(per_class, by_class[c].size()); });
  } else {
    // Pooled shuffle, then first round(f * n).
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    rng.shuffle(all.begin(), all.end());
    const auto count = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    test_idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(count, n)));
    for (auto i : test_idx) taken[i] = true;
    std::sort(test_idx.begin(), test_idx.end());
  }

  std::size_t rest = 0;
  for (std::size_t c = 0; c < classes; ++c) rest += remaining(c);
  std::vector<std::size_t> labeled_idx;
  if (spec.labeled_fraction >= 1.0) {
    labeled_idx = draw([&](std::size_t c) { return remaining(c); });
  } else if (spec.balance) {
    const auto per_class = static_cast<std::size_t>(std::llround(
        spec.labeled_fraction * static_cast<double>(rest) / static_cast<double>(classes)));
    labeled_idx = draw([&](std::size_t c) { return std::min(per_class, remaining(c)); });
  } else {
    const auto want = static_cast<std::size_t>(std::llround(spec.labeled_fraction * static_cast<double>(rest)));
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i]) pool.push_back(i);
    rng.shuffle(pool.begin(), pool.end());
    labeled_idx.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(want, pool.size())));
    for (auto i : labeled_idx) taken[i] = true;
    std::sort(labeled_idx.begin(), labeled_idx.end());
  }
  std::vector<std::size_t> unlabeled_idx;
  for (std::size_t i = 0; i < n; ++i)
    if (!taken[i]) unlabeled_idx.push_back(i);

  if (test_idx.empty()) throw ParameterError("split leaves the test partition empty");
  if (labeled_idx.empty()) throw ParameterError("split leaves the labeled partition empty");
  if (unlabeled_idx.empty() && spec.labeled_fraction < 1.0) {
    throw ParameterError("split leaves the unlabeled partition empty");
  }

  auto subset = [&](const std::vector<std::size_t>& idx, bool keep_labels) {
    std::vector<Sample> out;
    for (auto i : idx) {
      Sample s = set[i];
      if (!keep_labels) s.label.reset();
      out.push_back(std::move(s));
    }
    return SampleSet(std::move(out), set.class_names());
  };
  std::map<std::string, int> hidden;
  for (auto i : unlabeled_idx) hidden[set[i].id] = *set[i].label;

  DataSplit result;
  result.test = subset(test_idx, true);
  result.labeled_train = subset(labeled_idx, true);
  result.unlabeled_train = subset(unlabeled_idx, false);
  result.unlabeled_truth = EvaluationHarness::seal(std::move(hidden));
  return result;
}

void save_sample_set(const std::filesystem::path& prefix, const SampleSet& set) {
  auto with_ext = [&](const char* ext) {
    auto p = prefix;
    p += ext;
    return p;
  };
  {
    std::ofstream out(with_ext(".classes"), std::ios::trunc);
    if (!out) throw IoError("cannot write " + with_ext(".classes").string());
    for (const auto& c : set.class_names()) out << c << '\n';
  }
  {
    std::ofstream out(with_ext(".csv"), std::ios::trunc);
    if (!out) throw IoError("cannot write " + with_ext(".csv").string());
    out << "sample_id,label\n";
    for (const auto& s : set.samples()) {
      out << s.id << ',';
      if (s.label) out << set.class_names()[static_cast<std::size_t>(*s.label)];
      out << '\n';
    }
  }
  if (set.empty()) {
    std::filesystem::remove(with_ext(".tnsr"));
    return;
  }
  const Shape shape = set.image_shape();
  Shape stacked{set.size()};
  stacked.insert(stacked.end(), shape.begin(), shape.end());
  std::vector<double> data;
  data.reserve(shape_numel(stacked));
  for (const auto& s : set.samples()) data.insert(data.end(), s.image.data().begin(), s.image.data().end());
  save_tnsr(with_ext(".tnsr"), Tensor(stacked, std::move(data)));
}

SampleSet load_sample_set(const std::filesystem::path& prefix) {
  auto with_ext = [&](const char* ext) {
    auto p = prefix;
    p += ext;
    return p;
  };
  std::vector<std::string> classes;
  {
    std::ifstream in(with_ext(".classes"));
    if (!in) throw MissingArtifactError("missing " + with_ext(".classes").string());
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) classes.push_back(line);
  }
  std::vector<std::pair<std::string, std::string>> rows;
  {
    std::ifstream in(with_ext(".csv"));
    if (!in) throw MissingArtifactError("missing " + with_ext(".csv").string());
    std::string line;
    std::getline(in, line);
    if (line != "sample_id,label") throw IoError(with_ext(".csv").string() + ": bad header");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw IoError(with_ext(".csv").string() + ": malformed row");
      rows.emplace_back(line.substr(0, comma), line.substr(comma + 1));
    }
  }
  if (rows.empty()) return SampleSet({}, classes);
  const Tensor stacked = load_tnsr(with_ext(".tnsr"));
  if (stacked.rank() != 4 || stacked.dim(0) != rows.size()) {
    throw IoError(with_ext(".tnsr").string() + ": image stack does not match the id list");
  }
  const Shape shape{stacked.dim(1), stacked.dim(2), stacked.dim(3)};
  const std::size_t numel = shape_numel(shape);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> px(stacked.data().begin() + static_cast<std::ptrdiff_t>(i * numel),
                           stacked.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * numel));
    Sample s{rows[i].first, Tensor(shape, std::move(px)), std::nullopt};
    if (!rows[i].second.empty()) {
      const auto it = std::find(classes.begin(), classes.end(), rows[i].second);
      if (it == classes.end()) throw IoError("unknown label '" + rows[i].second + "'");
      s.label = static_cast<int>(it - classes.begin());
    }
    samples.push_back(std::move(s));
  }
  return SampleSet(std::move(samples), classes);
}

}  // namespace synthlabel
