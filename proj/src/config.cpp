#include "synthlabel/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "synthlabel/error.hpp"
#include "synthlabel/hashing.hpp"

namespace synthlabel {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

KeyValues without_seed(KeyValues kv) {
  KeyValues out;
  for (const auto& [k, v] : kv.entries()) {
    if (k != "seed") out.set(k, v);
  }
  return out;
}

KeyValues with_seed(const KeyValues& kv) {
  KeyValues out = kv;
  out.set("seed", std::uint64_t{0});
  return out;
}

// Wraps section-level parse errors with the section name.
template <typename F>
auto in_section(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw ConfigError("[" + name + "] " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  in_section("dataset", [&] {
    if (dataset.kind == DatasetConfig::Kind::procedural) dataset.procedural.validate();
    else if (dataset.image_dir.empty()) throw ConfigError("image_dir is required");
    return 0;
  });
  in_section("split", [&] {
    if (!(split.labeled_fraction > 0.0 && split.labeled_fraction <= 1.0)) {
      throw ConfigError("labeled_fraction must be in (0, 1]");
    }
    if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) {
      throw ConfigError("test_fraction must be in (0, 1)");
    }
    return 0;
  });
  in_section("augment", [&] { augment.validate(); return 0; });
  in_section("encoder", [&] { encoder.validate(); return 0; });
  in_section("train", [&] { train.validate(); return 0; });
  in_section("wrapper", [&] { wrapper.validate(); return 0; });
  in_section("inductive", [&] { inductive.validate(); return 0; });
  if (augment.output_h != encoder.in_h || augment.output_w != encoder.in_w) {
    throw ConfigError("augmentation output " + std::to_string(augment.output_h) + "x" +
                      std::to_string(augment.output_w) + " does not match encoder input " +
                      std::to_string(encoder.in_h) + "x" + std::to_string(encoder.in_w));
  }
  if (dataset.kind == DatasetConfig::Kind::procedural && encoder.in_channels != 3) {
    throw ConfigError("procedural images have 3 channels, encoder expects " +
                      std::to_string(encoder.in_channels));
  }
  if (positive_class != 0 && positive_class != 1) throw ConfigError("[run] positive_class must be 0 or 1");
}

RunConfig::Sections RunConfig::sections() const {
  Sections s;
  KeyValues run;
  run.set("seed", seed);
  run.set("positive_class", positive_class);
  s["run"] = run;

  KeyValues ds;
  if (dataset.kind == DatasetConfig::Kind::procedural) {
    ds = dataset.procedural.to_kv();
    ds.set("kind", "procedural");
  } else {
    ds.set("kind", "image_dir");
    ds.set("image_dir", dataset.image_dir);
    ds.set("labels_csv", dataset.labels_csv);
  }
  s["dataset"] = ds;
  s["split"] = without_seed(split.to_kv());
  s["augment"] = augment.to_kv();
  s["encoder"] = encoder.to_kv();
  s["train"] = without_seed(train.to_kv());
  s["wrapper"] = wrapper.to_kv();
  s["inductive"] = without_seed(inductive.to_kv());
  return s;
}

RunConfig RunConfig::from_sections(const Sections& sections) {
  RunConfig c;
  for (const auto& [name, kv] : sections) {
    if (name == "run") {
      c.seed = in_section(name, [&] { return kv.get_u64("seed"); });
      c.positive_class = static_cast<int>(in_section(name, [&] { return kv.get_u64("positive_class"); }));
    } else if (name == "dataset") {
      in_section(name, [&] {
        const std::string& kind = kv.get("kind");
        if (kind == "procedural") {
          KeyValues spec;
          for (const auto& [k, v] : kv.entries()) {
            if (k != "kind") spec.set(k, v);
          }
          c.dataset.kind = DatasetConfig::Kind::procedural;
          c.dataset.procedural = ProceduralSpec::from_kv(spec);
        } else if (kind == "image_dir") {
          c.dataset.kind = DatasetConfig::Kind::image_dir;
          c.dataset.image_dir = kv.get("image_dir");
          c.dataset.labels_csv = kv.contains("labels_csv") ? kv.get("labels_csv") : "";
        } else {
          throw ConfigError("unknown dataset kind '" + kind + "'");
        }
        return 0;
      });
    } else if (name == "split") {
      c.split = in_section(name, [&] { return SplitSpec::from_kv(with_seed(kv)); });
    } else if (name == "augment") {
      c.augment = in_section(name, [&] { return AugmentationSpec::from_kv(kv); });
    } else if (name == "encoder") {
      c.encoder = in_section(name, [&] { return EncoderConfig::from_kv(kv); });
    } else if (name == "train") {
      c.train = in_section(name, [&] { return TrainConfig::from_kv(with_seed(kv)); });
    } else if (name == "wrapper") {
      c.wrapper = in_section(name, [&] { return WrapperConfig::from_kv(kv); });
    } else if (name == "inductive") {
      c.inductive = in_section(name, [&] { return InductiveConfig::from_kv(with_seed(kv)); });
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
  }
  c.validate();
  return c;
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& [name, kv] : sections()) {
    out += "[" + name + "]\n";
    for (const auto& [k, v] : kv.entries()) out += k + " = " + v + "\n";
  }
  return out;
}

std::string RunConfig::hash() const { return short_hash(canonical_text()); }

std::string RunConfig::sections_hash(const std::vector<std::string>& names) const {
  const auto all = sections();
  std::string text;
  for (const auto& name : std::set<std::string>(names.begin(), names.end())) {
    const auto it = all.find(name);
    if (it == all.end()) throw ConfigError("unknown section [" + name + "]");
    text += "[" + name + "]\n" + it->second.canonical_text();
  }
  return short_hash(text);
}

RunConfig RunConfig::parse(std::string_view text) {
  // Start from the defaults and overlay the file; a key absent from the
  // defaults is unknown. image_dir datasets have their own key set.
  Sections sections = RunConfig{}.sections();
  std::map<std::string, KeyValues> given;
  std::string current;
  std::istringstream in{std::string(text)};
  std::size_t lineno = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!sections.count(current)) throw ConfigError(where + "unknown section [" + current + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (current.empty()) throw ConfigError(where + "key outside of a section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (given[current].contains(key)) throw ConfigError(where + "duplicate key '" + key + "'");
    given[current].set(key, value);
  }

  const bool image_dir = given.count("dataset") && given["dataset"].contains("kind") &&
                         given["dataset"].get("kind") == "image_dir";
  if (image_dir) {
    KeyValues ds;
    ds.set("kind", "image_dir");
    ds.set("image_dir", "");
    ds.set("labels_csv", "");
    sections["dataset"] = ds;
  }
  for (const auto& [name, kv] : given) {
    for (const auto& [k, v] : kv.entries()) {
      if (!sections[name].contains(k)) throw ConfigError("unknown key '" + k + "' in [" + name + "]");
      sections[name].set(k, v);
    }
  }
  return from_sections(sections);
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

SplitSpec RunConfig::split_spec() const {
  SplitSpec s = split;
  s.seed = stage_seeds().split;
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = stage_seeds().pretrain;
  return t;
}

InductiveConfig RunConfig::inductive_config() const {
  InductiveConfig c = inductive;
  c.seed = stage_seeds().inductive;
  return c;
}

std::string default_config_text() { return RunConfig{}.canonical_text(); }

}  // namespace synthlabel
