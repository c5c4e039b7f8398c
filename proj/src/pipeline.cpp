#include "synthlabel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "synthlabel/error.hpp"
#include "synthlabel/hashing.hpp"
#include "synthlabel/parallel.hpp"
#include "synthlabel/rng.hpp"
#include "synthlabel/tnsr_io.hpp"

namespace synthlabel {

namespace {

Tensor fit_to_input(const Tensor& image, std::size_t c, std::size_t h, std::size_t w) {
  if (image.rank() != 3 || image.dim(0) != c) {
    throw DimensionError("image " + shape_str(image.shape()) + " does not have " + std::to_string(c) +
                         " channels");
  }
  if (image.dim(1) == h && image.dim(2) == w) return image;
  return resize_bilinear(image, h, w);
}

void require_binary(const SampleSet& set, const char* what) {
  if (set.class_names().size() != 2) {
    throw ParameterError(std::string(what) + ": binary classification expects 2 classes, got " +
                         std::to_string(set.class_names().size()));
  }
}

}  // namespace

// --- Embeddings -------------------------------------------------------------------

Tensor embed_all(const EncoderModel& encoder, const SampleSet& samples) {
  if (samples.empty()) throw DegenerateInputError("embed_all needs at least one sample");
  const auto& cfg = encoder.config();
  Tensor out({samples.size(), cfg.embed_dim});
  parallel::parallel_for(samples.size(), [&](std::size_t i) {
    const Tensor h = encode(encoder, fit_to_input(samples[i].image, cfg.in_channels, cfg.in_h, cfg.in_w));
    std::copy(h.data().begin(), h.data().end(), out.row(i).begin());
  });
  return out;
}

void export_embeddings(const std::filesystem::path& prefix, const EncoderModel& encoder,
                       const SampleSet& samples) {
  save_tnsr(prefix.string() + ".tnsr", embed_all(encoder, samples));
  const std::filesystem::path ids = prefix.string() + ".ids.csv";
  std::ofstream out(ids, std::ios::trunc);
  if (!out) throw IoError("cannot open " + ids.string() + " for writing");
  out << "sample_id\n";
  for (const auto& s : samples.samples()) out << s.id << '\n';
}

EmbeddingTable read_embeddings(const std::filesystem::path& prefix) {
  EmbeddingTable t;
  t.matrix = load_tnsr(prefix.string() + ".tnsr");
  const std::filesystem::path ids = prefix.string() + ".ids.csv";
  std::ifstream in(ids);
  if (!in) throw MissingArtifactError("cannot open " + ids.string());
  std::string line;
  std::getline(in, line);
  if (line != "sample_id") throw IoError(ids.string() + ": bad header");
  while (std::getline(in, line)) {
    if (!line.empty()) t.ids.push_back(line);
  }
  if (t.matrix.rank() != 2 || t.matrix.dim(0) != t.ids.size()) {
    throw IoError("embedding matrix " + shape_str(t.matrix.shape()) + " does not match " +
                  std::to_string(t.ids.size()) + " ids");
  }
  return t;
}

// --- Wrapper ------------------------------------------------------------------------

void WrapperConfig::validate() const {
  if (!(svm.c > 0.0)) throw ParameterError("svm C must be positive");
  if (!(svm.tol > 0.0)) throw ParameterError("svm tol must be positive");
  if (knn_k == 0 || knn_k % 2 == 0) throw ParameterError("knn k must be odd");
  if (!(logreg.learning_rate > 0.0)) throw ParameterError("logreg learning rate must be positive");
  if (logreg.l2 < 0.0) throw ParameterError("logreg l2 must be non-negative");
}

KeyValues WrapperConfig::to_kv() const {
  KeyValues kv;
  kv.set("kind", std::string(to_string(kind)));
  kv.set("svm_c", svm.c);
  kv.set("svm_gamma", svm.gamma);
  kv.set("svm_tol", svm.tol);
  kv.set("svm_max_passes", std::uint64_t{svm.max_passes});
  kv.set("knn_k", std::uint64_t{knn_k});
  kv.set("logreg_learning_rate", logreg.learning_rate);
  kv.set("logreg_epochs", std::uint64_t{logreg.epochs});
  kv.set("logreg_l2", logreg.l2);
  kv.set("logreg_standardize", logreg.standardize);
  return kv;
}

WrapperConfig WrapperConfig::from_kv(const KeyValues& kv) {
  WrapperConfig c;
  c.kind = parse_wrapper_kind(kv.get("kind"));
  c.svm.c = kv.get_double("svm_c");
  c.svm.gamma = kv.get_double("svm_gamma");
  c.svm.tol = kv.get_double("svm_tol");
  c.svm.max_passes = kv.get_u64("svm_max_passes");
  c.knn_k = kv.get_u64("knn_k");
  c.logreg.learning_rate = kv.get_double("logreg_learning_rate");
  c.logreg.epochs = kv.get_u64("logreg_epochs");
  c.logreg.l2 = kv.get_double("logreg_l2");
  c.logreg.standardize = kv.get_bool("logreg_standardize");
  c.validate();
  return c;
}

std::string FittedWrapper::provenance() const {
  return std::string(to_string(kind_of(model))) + ":" + wrapper_hash(model);
}

FittedWrapper fit_wrapper_on(const Tensor& embeddings, std::span<const int> labels,
                             const std::string& encoder_hash, const WrapperConfig& cfg) {
  cfg.validate();
  for (int y : labels) {
    if (y != 0 && y != 1) throw ParameterError("wrapper labels must be class ids 0/1");
  }
  FittedWrapper out;
  out.encoder_hash = encoder_hash;
  switch (cfg.kind) {
    case WrapperKind::svm: {
      std::vector<int> pm(labels.size());
      std::transform(labels.begin(), labels.end(), pm.begin(), [](int y) { return y == 1 ? 1 : -1; });
      out.model = svm_train(embeddings, pm, cfg.svm);
      break;
    }
    case WrapperKind::knn:
      out.model = knn_fit(embeddings, labels, cfg.knn_k);
      break;
    case WrapperKind::logreg:
      out.model = logreg_train(embeddings, labels, cfg.logreg);
      break;
  }
  return out;
}

FittedWrapper fit_wrapper(const EncoderModel& encoder, const SampleSet& labeled, const WrapperConfig& cfg) {
  require_binary(labeled, "fit_wrapper");
  const auto labels = labeled.labels();
  return fit_wrapper_on(embed_all(encoder, labeled), labels, encoder_hash(encoder), cfg);
}

Prediction wrapper_predict(const WrapperModel& model, std::span<const double> h) {
  if (h.size() != embedding_dim(model)) {
    throw DimensionError("embedding of dimension " + std::to_string(h.size()) + " given to a wrapper fitted on " +
                         std::to_string(embedding_dim(model)));
  }
  if (const auto* svm = std::get_if<SvmModel>(&model)) {
    auto p = svm_predict(*svm, h);
    p.label = p.label > 0 ? 1 : 0;
    return p;
  }
  if (const auto* knn = std::get_if<KnnModel>(&model)) return knn_predict(*knn, h);
  return logreg_predict(std::get<LogRegModel>(model), h);
}

void save_fitted_wrapper(const std::filesystem::path& path, const FittedWrapper& wrapper) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_blob(out, wrapper.encoder_hash);
  write_wrapper(out, wrapper.model);
}

FittedWrapper load_fitted_wrapper(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  FittedWrapper w;
  w.encoder_hash = read_blob(in);
  w.model = read_wrapper(in);
  return w;
}

SyntheticLabelSet synthesize_labels(const EncoderModel& encoder, const FittedWrapper& wrapper,
                                    const SampleSet& unlabeled, bool allow_mismatch) {
  if (embedding_dim(wrapper.model) != encoder.config().embed_dim) {
    throw DimensionError("wrapper expects " + std::to_string(embedding_dim(wrapper.model)) +
                         "-dim embeddings, encoder produces " + std::to_string(encoder.config().embed_dim));
  }
  const std::string hash = encoder_hash(encoder);
  if (hash != wrapper.encoder_hash && !allow_mismatch) {
    throw ProvenanceError("wrapper was fitted on encoder " + wrapper.encoder_hash + ", not " + hash);
  }
  SyntheticLabelSet out;
  if (unlabeled.empty()) return out;
  const Tensor h = embed_all(encoder, unlabeled);
  const std::string provenance = wrapper.provenance();
  out.entries.resize(unlabeled.size());
  parallel::parallel_for(unlabeled.size(), [&](std::size_t i) {
    const auto p = wrapper_predict(wrapper.model, h.row(i));
    out.entries[i] = {unlabeled[i].id, p.label, p.score, provenance};
  });
  std::sort(out.entries.begin(), out.entries.end(),
            [](const SyntheticLabel& a, const SyntheticLabel& b) { return a.sample_id < b.sample_id; });
  return out;
}

// --- Inductive classifier ---------------------------------------------------------

void InductiveConfig::validate() const {
  if (conv_layers.empty()) throw ParameterError("inductive classifier needs at least one conv layer");
  if (batch_size == 0) throw ParameterError("inductive batch_size must be positive");
  if (learning_rate < 0.0 || !std::isfinite(learning_rate)) {
    throw ParameterError("inductive learning_rate must be finite and non-negative");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw ParameterError("inductive momentum must be in [0, 1)");
  augmentation.validate();
}

KeyValues InductiveConfig::to_kv() const {
  KeyValues kv;
  kv.set("conv_layers", format_conv_layers(conv_layers));
  kv.set("steps", std::uint64_t{steps});
  kv.set("batch_size", std::uint64_t{batch_size});
  kv.set("learning_rate", learning_rate);
  kv.set("momentum", momentum);
  kv.set("seed", seed);
  kv.set("augment", augment);
  kv.set("standardize_input", standardize_input);
  const KeyValues aug = augmentation.to_kv();
  for (const auto& [k, v] : aug.entries()) kv.set("aug_" + k, v);
  return kv;
}

InductiveConfig InductiveConfig::from_kv(const KeyValues& kv) {
  InductiveConfig c;
  c.conv_layers = parse_conv_layers(kv.get("conv_layers"));
  c.steps = kv.get_u64("steps");
  c.batch_size = kv.get_u64("batch_size");
  c.learning_rate = kv.get_double("learning_rate");
  c.momentum = kv.get_double("momentum");
  c.seed = kv.get_u64("seed");
  c.augment = kv.get_bool("augment");
  c.standardize_input = kv.get_bool("standardize_input");
  KeyValues aug;
  for (const auto& [k, v] : kv.entries()) {
    if (k.rfind("aug_", 0) == 0) aug.set(k.substr(4), v);
  }
  c.augmentation = AugmentationSpec::from_kv(aug);
  c.validate();
  return c;
}

namespace {

ad::Var classifier_input(ad::Graph& g, const Tensor& image, const InductiveConfig& cfg) {
  const ad::Var x = g.constant_ref(image);
  return cfg.standardize_input ? ad::standardize_channels(g, x) : x;
}

}  // namespace

InductiveClassifier::InductiveClassifier(InductiveConfig config, ConvNet net,
                                         std::vector<std::string> class_names)
    : config_(std::move(config)), net_(std::move(net)), class_names_(std::move(class_names)) {
  if (net_.config().out_dim != class_names_.size()) {
    throw DimensionError("classifier head has " + std::to_string(net_.config().out_dim) + " outputs for " +
                         std::to_string(class_names_.size()) + " classes");
  }
}

int InductiveClassifier::predict(const Tensor& image) const {
  const auto& nc = net_.config();
  ad::Graph g;
  const auto bound = net_.bind(g, false);
  const Tensor input = fit_to_input(image, nc.in_channels, nc.in_h, nc.in_w);
  const auto logits = net_.forward(g, bound, classifier_input(g, input, config_));
  const auto v = g.value(logits).data();
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<int> InductiveClassifier::predict(const SampleSet& samples) const {
  std::vector<int> out(samples.size());
  parallel::parallel_for(samples.size(), [&](std::size_t i) { out[i] = predict(samples[i].image); });
  return out;
}

InductiveClassifier train_inductive(const SampleSet& labeled, const SampleSet& unlabeled,
                                    const SyntheticLabelSet& synthetic, const InductiveConfig& cfg) {
  cfg.validate();
  if (!labeled.fully_labeled()) throw ParameterError("train_inductive: real set must be fully labeled");
  if (!synthetic.empty() && unlabeled.class_names() != labeled.class_names()) {
    throw ParameterError("train_inductive: label alphabets of real and unlabeled sets differ");
  }

  // Training union: real samples first, then synthetic ones in id order.
  struct Item {
    const Tensor* image;
    int label;
  };
  std::vector<Item> items;
  std::vector<LabelSource> provenance;
  for (const auto& s : labeled.samples()) {
    items.push_back({&s.image, *s.label});
    provenance.push_back({s.id, "real"});
  }
  const auto n_classes = static_cast<int>(labeled.class_names().size());
  for (const auto& e : synthetic.entries) {
    const auto idx = unlabeled.find(e.sample_id);
    if (!idx) throw ParameterError("synthetic label for unknown sample '" + e.sample_id + "'");
    if (e.label < 0 || e.label >= n_classes) {
      throw ParameterError("synthetic label " + std::to_string(e.label) + " out of range");
    }
    items.push_back({&unlabeled[*idx].image, e.label});
    provenance.push_back({e.sample_id, "synthetic:" + e.provenance});
  }
  if (items.empty()) throw ParameterError("train_inductive: empty training set");

  const Shape& shape = items.front().image->shape();
  ConvNetConfig net_cfg{shape[0], cfg.augment ? cfg.augmentation.output_h : shape[1],
                        cfg.augment ? cfg.augmentation.output_w : shape[2], cfg.conv_layers,
                        labeled.class_names().size()};
  InductiveClassifier clf(cfg, ConvNet::init(net_cfg, derive_seed(cfg.seed, "init")), labeled.class_names());
  clf.provenance = std::move(provenance);

  ConvNet& net = clf.net();
  SgdOptimizer optimizer(cfg.learning_rate, cfg.momentum);
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, "shuffle");
  const std::uint64_t aug_seed = derive_seed(cfg.seed, "augment");

  std::vector<std::size_t> order(items.size());
  std::size_t cursor = items.size();  // forces a shuffle on the first step
  std::size_t pass = 0;
  double pass_loss = 0.0;
  std::size_t pass_count = 0;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> batch;
    while (batch.size() < cfg.batch_size) {
      if (cursor == items.size()) {
        if (pass_count > 0) clf.loss_trace.push_back(pass_loss / static_cast<double>(pass_count));
        pass_loss = 0.0;
        pass_count = 0;
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(shuffle_seed, pass++));
        rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
      if (batch.size() == items.size()) break;
    }

    struct SampleGraph {
      ad::Graph graph;
      std::vector<ad::Var> bound;
      ad::Var loss;
      Tensor input;
    };
    std::vector<SampleGraph> graphs(batch.size());
    const std::uint64_t step_seed = derive_seed(aug_seed, step);
    try {
      parallel::parallel_for(batch.size(), [&](std::size_t b) {
        auto& sg = graphs[b];
        const Item& item = items[batch[b]];
        sg.input = cfg.augment ? augment(cfg.augmentation, *item.image, {step_seed, b}) : *item.image;
        sg.bound = net.bind(sg.graph, true);
        const auto logits = net.forward(sg.graph, sg.bound, classifier_input(sg.graph, sg.input, cfg));
        const std::size_t y = static_cast<std::size_t>(item.label);
        sg.loss = ad::softmax_cross_entropy(sg.graph, logits, std::span<const std::size_t>(&y, 1));
        sg.graph.backward(sg.loss);
      });
    } catch (const NumericError& e) {
      std::ostringstream msg;
      msg << "inductive training diverged at step " << step + 1 << " (" << e.what() << "); loss trace:";
      for (double l : clf.loss_trace) msg << ' ' << l;
      throw DivergedTrainingError(msg.str());
    }

    const auto params = net.parameters();
    std::vector<Tensor> grads;
    for (const Tensor* p : params) grads.emplace_back(p->shape(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    double batch_loss = 0.0;
    for (const auto& sg : graphs) {
      batch_loss += sg.graph.value(sg.loss)[0];
      for (std::size_t p = 0; p < params.size(); ++p) {
        const Tensor& gp = sg.graph.grad(sg.bound[p]);
        auto dst = grads[p].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += inv * gp[i];
      }
    }
    if (!std::isfinite(batch_loss)) {
      throw DivergedTrainingError("inductive training diverged: non-finite loss at step " +
                                  std::to_string(step + 1));
    }
    pass_loss += batch_loss;
    pass_count += batch.size();
    optimizer.step(params, grads);
  }
  if (pass_count > 0) clf.loss_trace.push_back(pass_loss / static_cast<double>(pass_count));
  return clf;
}

void save_inductive(const std::filesystem::path& path, const InductiveClassifier& classifier) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  KeyValues kv = classifier.config().to_kv();
  const auto& nc = classifier.net().config();
  kv.set("net_in_channels", std::uint64_t{nc.in_channels});
  kv.set("net_in_h", std::uint64_t{nc.in_h});
  kv.set("net_in_w", std::uint64_t{nc.in_w});
  std::string names;
  for (const auto& c : classifier.class_names()) names += (names.empty() ? "" : ",") + c;
  kv.set("class_names", names);
  write_blob(out, kv.canonical_text());
  for (const Tensor* p : classifier.net().parameters()) write_tnsr(out, *p);
}

InductiveClassifier load_inductive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  KeyValues kv = KeyValues::parse(read_blob(in));
  std::vector<std::string> names;
  std::stringstream ss(kv.get("class_names"));
  for (std::string n; std::getline(ss, n, ',');) names.push_back(n);
  ConvNetConfig nc{kv.get_u64("net_in_channels"), kv.get_u64("net_in_h"), kv.get_u64("net_in_w"), {},
                   names.size()};
  KeyValues cfg_kv;
  for (const auto& [k, v] : kv.entries()) {
    if (k.rfind("net_", 0) != 0 && k != "class_names") cfg_kv.set(k, v);
  }
  const auto cfg = InductiveConfig::from_kv(cfg_kv);
  nc.layers = cfg.conv_layers;
  ConvNet net = ConvNet::zeros(nc);
  for (Tensor* p : net.parameters()) {
    Tensor t = read_tnsr(in);
    if (t.shape() != p->shape() || !t.all_finite()) {
      throw IoError(path.string() + ": classifier tensor does not match its config");
    }
    *p = std::move(t);
  }
  return InductiveClassifier(cfg, std::move(net), std::move(names));
}

void write_provenance_csv(const std::filesystem::path& path, const std::vector<LabelSource>& sources) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "sample_id,source\n";
  for (const auto& s : sources) out << s.sample_id << ',' << s.source << '\n';
}

// --- Orchestration --------------------------------------------------------------------

StageSeeds StageSeeds::from_master(std::uint64_t master) {
  return {derive_seed(master, "split"), derive_seed(master, "encoder-init"), derive_seed(master, "pretrain"),
          derive_seed(master, "inductive")};
}

DownstreamResult transfer(const EncoderModel& encoder, const SampleSet& labeled, const SampleSet& unlabeled,
                          const SampleSet& test, const WrapperConfig& wrapper_cfg,
                          const InductiveConfig& inductive_cfg, int positive_class) {
  DownstreamResult r;
  r.wrapper = fit_wrapper(encoder, labeled, wrapper_cfg);
  r.synthetic = synthesize_labels(encoder, r.wrapper, unlabeled);

  const Tensor h_test = embed_all(encoder, test);
  std::vector<int> wrapper_pred(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) wrapper_pred[i] = wrapper_predict(r.wrapper.model, h_test.row(i)).label;
  const auto truth = test.labels();
  r.wrapper_test = evaluate(wrapper_pred, truth, positive_class);

  r.classifier = train_inductive(labeled, unlabeled, r.synthetic, inductive_cfg);
  r.classifier_test = evaluate(r.classifier.predict(test), truth, positive_class);
  return r;
}

}  // namespace synthlabel
