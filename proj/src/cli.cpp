#include "synthlabel/cli.hpp"

#include <fcntl.h>
#include <fmt/format.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "synthlabel/error.hpp"
#include "synthlabel/experiment.hpp"
#include "synthlabel/hashing.hpp"
#include "synthlabel/verification.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace synthlabel {

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> labeled_fraction;
  std::optional<std::string> wrapper;
  std::string out = "runs";
  bool force = false;
  std::string sweep;
  std::vector<std::uint64_t> seeds;
  std::string encoder;
};

enum class Stage { data, pretrain, embed, wrapper, label, inductive, eval };

struct StageInfo {
  const char* name;
  const char* command;
  const char* artifact;
};

const StageInfo& info(Stage s) {
  static const StageInfo table[] = {
      {"data", "gen-data", "dataset split"},
      {"pretrain", "pretrain", "encoder checkpoint"},
      {"embed", "embed", "embeddings"},
      {"wrapper", "fit-wrapper", "wrapper model"},
      {"label", "label", "synthetic labels"},
      {"inductive", "train-inductive", "inductive classifier"},
      {"eval", "eval", "evaluation report"},
  };
  return table[static_cast<int>(s)];
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_trace(const fs::path& path, const std::vector<double>& trace) {
  LossTrace t;
  t.epoch_mean = trace;
  t.write_csv(path);
}

/// Exclusive lock on an output directory, released on destruction.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw IoError("output directory " + dir.string() + " is locked by another process (remove " +
                    path_.string() + " if that process is gone)");
    }
  }
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

/// Output directory holding content-addressed stage directories
/// (<stage>-<key>/) and manifest.json.
class RunDir {
 public:
  RunDir(RunConfig cfg, fs::path root, bool force, std::ostream& log)
      : cfg_(std::move(cfg)), root_(std::move(root)), force_(force), log_(log), lock_(root_) {
    const fs::path m = root_ / "manifest.json";
    manifest_ = fs::exists(m) ? json::parse(read_text(m)) : json::object();
  }

  const RunConfig& config() const { return cfg_; }

  std::string key(Stage s) const {
    switch (s) {
      case Stage::data:
        return cfg_.sections_hash({"run", "dataset", "split"});
      case Stage::pretrain:
        return short_hash(key(Stage::data) + cfg_.sections_hash({"augment", "encoder", "train"}));
      case Stage::embed:
        return key(Stage::pretrain);
      case Stage::wrapper:
        return short_hash(key(Stage::pretrain) + cfg_.sections_hash({"wrapper"}));
      case Stage::label:
        return key(Stage::wrapper);
      case Stage::inductive:
        return short_hash(key(Stage::label) + cfg_.sections_hash({"inductive"}));
      case Stage::eval:
        return key(Stage::inductive);
    }
    return {};
  }

  fs::path dir_for(const std::string& name, const std::string& key) const { return root_ / (name + "-" + key); }

  /// Directory of a finished upstream stage for the current config.
  fs::path require(Stage s) {
    const auto& si = info(s);
    const fs::path dir = dir_for(si.name, key(s));
    if (fs::is_directory(dir)) {
      used_[si.name] = key(s);
      return dir;
    }
    const auto& stages = manifest_["stages"];
    if (stages.is_object() && stages.contains(si.name)) {
      const std::string other = stages[si.name]["key"];
      const fs::path other_dir = dir_for(si.name, other);
      if (fs::is_directory(other_dir)) {
        if (!force_) {
          throw ConfigError(fmt::format(
              "config hash mismatch: the existing {} was produced under configuration {}, the current "
              "configuration expects {}; run {} or pass --force to use it anyway",
              si.artifact, stages[si.name].value("config_hash", std::string("?")), key(s), si.command));
        }
        log_ << "warning: --force: using " << si.artifact << " from " << other_dir.filename().string()
             << " produced under a different configuration\n";
        used_[si.name] = other;
        return other_dir;
      }
    }
    throw MissingArtifactError(fmt::format("missing {}; run {}", si.artifact, si.command));
  }

  /// Stage outputs go to a scratch directory that replaces the final one
  /// only once the stage has succeeded.
  fs::path begin(const std::string& name, const std::string& key) {
    const fs::path tmp = root_ / (name + "-" + key + ".partial");
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    used_.clear();
    return tmp;
  }
  fs::path begin(Stage s) { return begin(info(s).name, key(s)); }

  void commit(const std::string& name, const std::string& key, const std::string& command) {
    const fs::path tmp = root_ / (name + "-" + key + ".partial");
    json outputs = json::object();
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(tmp)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) outputs[fs::relative(f, tmp).generic_string()] = sha256_file(f);

    const fs::path dir = dir_for(name, key);
    fs::remove_all(dir);
    fs::rename(tmp, dir);

    json inputs = json::object();
    for (const auto& [k, v] : used_) inputs[k] = v;
    manifest_["config_hash"] = cfg_.hash();
    manifest_["stages"][name] = {{"command", command},  {"config_hash", cfg_.hash()}, {"dir", dir.filename().string()},
                                 {"inputs", inputs},   {"key", key},                {"outputs", outputs}};
    write_text(root_ / ("config-" + cfg_.hash() + ".cfg"), cfg_.canonical_text());
    write_text(root_ / "manifest.json", manifest_.dump(2) + "\n");
    log_ << command << ": wrote " << dir.string() << "\n";
  }
  void commit(Stage s) { commit(info(s).name, key(s), info(s).command); }

  void note_input(const std::string& name, const std::string& value) { used_[name] = value; }

 private:
  RunConfig cfg_;
  fs::path root_;
  bool force_;
  std::ostream& log_;
  DirLock lock_;
  json manifest_;
  std::map<std::string, std::string> used_;
};

DataSplit load_split(const fs::path& dir) {
  return {load_sample_set(dir / "labeled"), load_sample_set(dir / "unlabeled"), load_sample_set(dir / "test"),
          EvaluationHarness::load(dir / "truth.csv")};
}

RunConfig effective_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  auto sections = cfg.sections();
  if (o.seed) sections["run"].set("seed", *o.seed);
  if (o.labeled_fraction) sections["split"].set("labeled_fraction", *o.labeled_fraction);
  if (o.wrapper) sections["wrapper"].set("kind", *o.wrapper);
  return RunConfig::from_sections(sections);
}

// --- Stages ---------------------------------------------------------------------------

void stage_gen_data(RunDir& run, std::ostream& out) {
  const fs::path tmp = run.begin(Stage::data);
  const DataSplit s = make_split(run.config());
  save_sample_set(tmp / "labeled", s.labeled_train);
  save_sample_set(tmp / "unlabeled", s.unlabeled_train);
  save_sample_set(tmp / "test", s.test);
  EvaluationHarness::save(tmp / "truth.csv", s.unlabeled_truth);
  out << fmt::format("gen-data: {} labeled, {} unlabeled, {} test\n", s.labeled_train.size(),
                     s.unlabeled_train.size(), s.test.size());
  run.commit(Stage::data);
}

void stage_pretrain(RunDir& run, std::ostream& out) {
  const DataSplit s = load_split(run.require(Stage::data));
  const fs::path tmp = run.begin(Stage::pretrain);
  run.note_input("data", run.key(Stage::data));
  const auto result = run_pretrain(run.config(), s, [&](std::size_t epoch, const EncoderModel& m) {
    save_encoder(tmp / fmt::format("encoder-epoch-{:03d}.ckpt", epoch), m);
  });
  save_encoder(tmp / "encoder.ckpt", result.model);
  result.trace.write_csv(tmp / "loss.csv");
  out << fmt::format("pretrain: NT-Xent {:.4f} (epoch 1) -> {:.4f} (epoch {})\n", result.trace.epoch_mean.front(),
                     result.trace.epoch_mean.back(), result.trace.epoch_mean.size());
  if (result.repaired_rows > 0) out << "pretrain: " << result.repaired_rows << " zero projections repaired\n";
  run.commit(Stage::pretrain);
}

void stage_embed(RunDir& run, std::ostream& out) {
  const DataSplit s = load_split(run.require(Stage::data));
  const auto encoder = load_encoder(run.require(Stage::pretrain) / "encoder.ckpt");
  const fs::path tmp = run.begin(Stage::embed);
  run.note_input("data", run.key(Stage::data));
  run.note_input("pretrain", run.key(Stage::pretrain));
  export_embeddings(tmp / "labeled", encoder, s.labeled_train);
  if (!s.unlabeled_train.empty()) export_embeddings(tmp / "unlabeled", encoder, s.unlabeled_train);
  export_embeddings(tmp / "test", encoder, s.test);
  out << "embed: " << encoder.config().embed_dim << "-dim embeddings exported\n";
  run.commit(Stage::embed);
}

void stage_fit_wrapper(RunDir& run, std::ostream& out) {
  const fs::path data = run.require(Stage::data);
  const fs::path pre = run.require(Stage::pretrain);
  const DataSplit s = load_split(data);
  const auto encoder = load_encoder(pre / "encoder.ckpt");
  const fs::path tmp = run.begin(Stage::wrapper);
  run.note_input("data", data.filename().string());
  run.note_input("pretrain", pre.filename().string());
  const auto w = fit_wrapper(encoder, s.labeled_train, run.config().wrapper);
  save_fitted_wrapper(tmp / "wrapper.bin", w);
  out << "fit-wrapper: " << w.provenance() << " on " << s.labeled_train.size() << " labeled samples\n";
  run.commit(Stage::wrapper);
}

void stage_label(RunDir& run, std::ostream& out, bool force) {
  const fs::path data = run.require(Stage::data);
  const fs::path pre = run.require(Stage::pretrain);
  const fs::path wdir = run.require(Stage::wrapper);
  const DataSplit s = load_split(data);
  const auto encoder = load_encoder(pre / "encoder.ckpt");
  const auto wrapper = load_fitted_wrapper(wdir / "wrapper.bin");
  const fs::path tmp = run.begin(Stage::label);
  run.note_input("data", data.filename().string());
  run.note_input("pretrain", pre.filename().string());
  run.note_input("wrapper", wdir.filename().string());
  const auto labels = synthesize_labels(encoder, wrapper, s.unlabeled_train, force);
  labels.write_csv(tmp / "synthetic.csv");
  out << "label: " << labels.size() << " synthetic labels\n";
  run.commit(Stage::label);
}

void stage_train_inductive(RunDir& run, std::ostream& out) {
  const fs::path data = run.require(Stage::data);
  const fs::path ldir = run.require(Stage::label);
  const DataSplit s = load_split(data);
  const auto synthetic = SyntheticLabelSet::read_csv(ldir / "synthetic.csv");
  const fs::path tmp = run.begin(Stage::inductive);
  run.note_input("data", data.filename().string());
  run.note_input("label", ldir.filename().string());
  const auto cfg = run.config().inductive_config();
  const auto clf = train_inductive(s.labeled_train, s.unlabeled_train, synthetic, cfg);
  const auto base = train_baseline(run.config(), s);
  save_inductive(tmp / "classifier.bin", clf);
  save_inductive(tmp / "baseline.bin", base);
  write_provenance_csv(tmp / "provenance.csv", clf.provenance);
  write_trace(tmp / "loss.csv", clf.loss_trace);
  write_trace(tmp / "baseline_loss.csv", base.loss_trace);
  out << fmt::format("train-inductive: {} real + {} synthetic labels, final loss {:.4f} (baseline {:.4f})\n",
                     s.labeled_train.size(), synthetic.size(), clf.loss_trace.back(), base.loss_trace.back());
  run.commit(Stage::inductive);
}

std::vector<int> wrapper_predictions(const FittedWrapper& w, const EncoderModel& encoder, const SampleSet& set) {
  const Tensor h = embed_all(encoder, set);
  std::vector<int> out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) out[i] = wrapper_predict(w.model, h.row(i)).label;
  return out;
}

void stage_eval(RunDir& run, std::ostream& out) {
  const fs::path data = run.require(Stage::data);
  const fs::path pre = run.require(Stage::pretrain);
  const fs::path wdir = run.require(Stage::wrapper);
  const fs::path ldir = run.require(Stage::label);
  const fs::path idir = run.require(Stage::inductive);
  const DataSplit s = load_split(data);
  const auto encoder = load_encoder(pre / "encoder.ckpt");
  const auto wrapper = load_fitted_wrapper(wdir / "wrapper.bin");
  const auto synthetic = SyntheticLabelSet::read_csv(ldir / "synthetic.csv");
  const auto clf = load_inductive(idir / "classifier.bin");
  const auto base = load_inductive(idir / "baseline.bin");
  const fs::path tmp = run.begin(Stage::eval);
  for (const auto& d : {data, pre, wdir, ldir, idir}) {
    const std::string n = d.filename().string();
    run.note_input(n.substr(0, n.rfind('-')), n);
  }

  const int pos = run.config().positive_class;
  const auto truth = s.test.labels();
  const auto clf_report = evaluate(clf.predict(s.test), truth, pos);
  const auto base_report = evaluate(base.predict(s.test), truth, pos);
  const auto wrapper_report = evaluate(wrapper_predictions(wrapper, encoder, s.test), truth, pos);
  write_text(tmp / "classifier.json", clf_report.to_json());
  write_text(tmp / "baseline.json", base_report.to_json());
  write_text(tmp / "wrapper.json", wrapper_report.to_json());
  const std::string kind(to_string(kind_of(wrapper.model)));
  std::vector<std::pair<std::string, MetricsReport>> rows{{"Supervised baseline", base_report},
                                                          {"Wrapper (" + kind + ")", wrapper_report}};
  if (!synthetic.empty()) {
    const auto quality = synthetic_label_quality(synthetic, s.unlabeled_truth, pos);
    write_text(tmp / "synthetic_quality.json", quality.to_json());
    rows.push_back({"Synthetic labels (" + kind + ")", quality});
  }
  rows.push_back({"Inductive CNN", clf_report});
  out << render_table(rows);
  run.commit(Stage::eval);
}

void run_sweep(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const std::string prefix = "labeled-fraction=";
  if (o.sweep.rfind(prefix, 0) != 0) throw ConfigError("--sweep expects labeled-fraction=<f1>,<f2>,...");
  std::vector<double> fractions;
  std::stringstream ss(o.sweep.substr(prefix.size()));
  for (std::string f; std::getline(ss, f, ',');) fractions.push_back(parse_double(f, "--sweep"));
  if (fractions.empty()) throw ConfigError("--sweep needs at least one fraction");
  std::vector<std::uint64_t> seeds = o.seeds;
  if (seeds.empty()) seeds.push_back(cfg.seed);

  DirLock lock(o.out);
  std::string tag = cfg.hash() + o.sweep;
  for (auto seed : seeds) tag += "," + std::to_string(seed);
  const fs::path csv = fs::path(o.out) / ("sweep-" + short_hash(tag) + ".csv");
  std::string text = "labeled_fraction,seed,baseline_accuracy,pipeline_accuracy,wrapper_accuracy,synthetic_accuracy\n";
  for (const auto seed : seeds) {
    std::optional<PretrainResult> pre;
    for (const double f : fractions) {
      auto sections = cfg.sections();
      sections["run"].set("seed", seed);
      sections["split"].set("labeled_fraction", f);
      const RunConfig c = RunConfig::from_sections(sections);
      const DataSplit s = make_split(c);
      // The pretraining set does not depend on the labeled fraction.
      if (!pre) pre = run_pretrain(c, s);
      const auto r = run_downstream(c, s, *pre);
      const std::string synth = s.unlabeled_train.empty() ? "" : format_double(r.synthetic_quality.accuracy);
      text += fmt::format("{},{},{},{},{},{}\n", format_double(f), seed, format_double(r.baseline_test.accuracy),
                          format_double(r.pipeline.classifier_test.accuracy),
                          format_double(r.pipeline.wrapper_test.accuracy), synth);
      out << fmt::format("sweep: fraction {} seed {}: baseline {:.1f}%, pipeline {:.1f}%\n", f, seed,
                         100.0 * r.baseline_test.accuracy, 100.0 * r.pipeline.classifier_test.accuracy);
    }
  }
  write_text(csv, text);
  out << "eval: wrote " << csv.string() << "\n";
}

void run_transfer(const Options& o, RunDir& run, std::ostream& out) {
  if (o.encoder.empty()) throw ConfigError("transfer needs --encoder <checkpoint pretrained on the source data>");
  const fs::path data = run.require(Stage::data);
  const DataSplit s = load_split(data);
  const auto encoder = load_encoder(o.encoder);
  const std::string key =
      short_hash(run.key(Stage::data) + sha256_file(o.encoder) + run.config().sections_hash({"wrapper", "inductive"}));
  const fs::path tmp = run.begin("transfer", key);
  run.note_input("data", data.filename().string());
  run.note_input("encoder", encoder_hash(encoder));

  const auto& cfg = run.config();
  const auto r = transfer(encoder, s.labeled_train, s.unlabeled_train, s.test, cfg.wrapper, cfg.inductive_config(),
                          cfg.positive_class);
  save_fitted_wrapper(tmp / "wrapper.bin", r.wrapper);
  r.synthetic.write_csv(tmp / "synthetic.csv");
  save_inductive(tmp / "classifier.bin", r.classifier);
  write_provenance_csv(tmp / "provenance.csv", r.classifier.provenance);
  write_text(tmp / "wrapper.json", r.wrapper_test.to_json());
  write_text(tmp / "classifier.json", r.classifier_test.to_json());
  const std::string kind(to_string(kind_of(r.wrapper.model)));
  out << render_table({{"Transferred " + kind, r.wrapper_test}, {"Transferred CNN", r.classifier_test}});
  out << fmt::format("majority-class rate on test: {:.1f}%\n", 100.0 * majority_rate(s.test));
  run.commit("transfer", key, "transfer");
}

int grad_check_command(std::ostream& out) {
  bool ok = true;
  for (const auto& r : run_grad_checks()) {
    out << fmt::format("{:<4} {:<36} max rel error {:.3e}\n", r.passed ? "ok" : "FAIL", r.name, r.max_rel_error);
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive pretraining, wrapper labeling and inductive training"};
  app.require_subcommand(1);
  Options o;

  std::vector<CLI::App*> staged;
  auto add = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    if (name != "grad-check") {
      sub->add_option("--config", o.config, "Run configuration file (defaults apply when omitted)")
          ->check(CLI::ExistingFile);
      sub->add_option("--seed", o.seed, "Master seed override");
      sub->add_option("--labeled-fraction", o.labeled_fraction, "Labeled fraction override");
      sub->add_option("--wrapper", o.wrapper, "Wrapper override")->check(CLI::IsMember({"svm", "knn", "logreg"}));
      sub->add_option("--out", o.out, "Output directory")->capture_default_str();
      sub->add_flag("--force", o.force, "Accept upstream artifacts from a different configuration");
    }
    return sub;
  };
  add("gen-data", "Generate or load the dataset and split it");
  add("pretrain", "Contrastive pretraining of the encoder");
  add("embed", "Export embeddings of all partitions");
  add("fit-wrapper", "Fit the wrapper classifier on labeled embeddings");
  add("label", "Predict synthetic labels for the unlabeled partition");
  add("train-inductive", "Train the inductive classifier and the supervised baseline");
  auto* eval = add("eval", "Evaluate on the test partition");
  eval->add_option("--sweep", o.sweep, "labeled-fraction=<f1>,<f2>,... runs the pipeline per fraction");
  eval->add_option("--seeds", o.seeds, "Master seeds for --sweep")->delimiter(',');
  auto* tr = add("transfer", "Run the downstream stages on this dataset with a foreign encoder");
  tr->add_option("--encoder", o.encoder, "Encoder checkpoint pretrained on the source dataset")
      ->check(CLI::ExistingFile);
  add("run-all", "gen-data, pretrain, embed, fit-wrapper, label, train-inductive, eval");
  add("grad-check", "Finite-difference verification of all gradients");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "grad-check") return grad_check_command(out);
    const RunConfig cfg = effective_config(o);
    if (cmd == "eval" && !o.sweep.empty()) {
      run_sweep(o, cfg, out);
      return 0;
    }
    RunDir run(cfg, o.out, o.force, err);
    if (cmd == "gen-data") stage_gen_data(run, out);
    else if (cmd == "pretrain") stage_pretrain(run, out);
    else if (cmd == "embed") stage_embed(run, out);
    else if (cmd == "fit-wrapper") stage_fit_wrapper(run, out);
    else if (cmd == "label") stage_label(run, out, o.force);
    else if (cmd == "train-inductive") stage_train_inductive(run, out);
    else if (cmd == "eval") stage_eval(run, out);
    else if (cmd == "transfer") run_transfer(o, run, out);
    else if (cmd == "run-all") {
      stage_gen_data(run, out);
      stage_pretrain(run, out);
      stage_embed(run, out);
      stage_fit_wrapper(run, out);
      stage_label(run, out, o.force);
      stage_train_inductive(run, out);
      stage_eval(run, out);
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace synthlabel
