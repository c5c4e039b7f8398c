#include "synthlabel/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "synthlabel/error.hpp"
#include "synthlabel/parallel.hpp"
#include "synthlabel/rng.hpp"

namespace synthlabel {

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  const double nu = l2_norm(u), nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw DegenerateInputError("cosine similarity of a zero vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

namespace {

void validate_batch(const Tensor& z, double tau) {
  if (!(tau > 0.0)) throw ParameterError("temperature must be positive");
  if (z.rank() != 2 || z.dim(0) % 2 != 0 || z.dim(0) < 4) {
    throw DimensionError("NT-Xent needs a [2N x D] batch with N >= 2, got " + shape_str(z.shape()));
  }
}

}  // namespace

NtXentResult nt_xent_loss_and_grad(const Tensor& z, double tau) {
  validate_batch(z, tau);
  const std::size_t rows = z.dim(0), d = z.dim(1);
  std::vector<double> norms(rows);
  Tensor n(z.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    norms[i] = l2_norm(z.row(i));
    if (norms[i] == 0.0) {
      throw DegenerateInputError("NT-Xent: projection row " + std::to_string(i) + " is zero");
    }
    for (std::size_t c = 0; c < d; ++c) n.at(i, c) = z.at(i, c) / norms[i];
  }
  Tensor sim({rows, rows});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = i; k < rows; ++k) {
      const double s = dot(n.row(i), n.row(k));
      sim.at(i, k) = s;
      sim.at(k, i) = s;
    }
  }

  // a(i,k) = d loss / d sim(i,k) through row i's term only.
  Tensor a({rows, rows});
  const double inv_rows = 1.0 / static_cast<double>(rows);
  double loss = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t partner = i ^ 1U;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rows; ++k) {
      if (k != i) mx = std::max(mx, sim.at(i, k) / tau);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
      if (k != i) total += std::exp(sim.at(i, k) / tau - mx);
    }
    const double lse = mx + std::log(total);
    loss += lse - sim.at(i, partner) / tau;
    for (std::size_t k = 0; k < rows; ++k) {
      if (k == i) continue;
      const double p = std::exp(sim.at(i, k) / tau - lse);
      a.at(i, k) = inv_rows * (p - (k == partner ? 1.0 : 0.0)) / tau;
    }
  }
  loss *= inv_rows;

  Tensor grad(z.shape());
  std::vector<double> dn(d);
  for (std::size_t i = 0; i < rows; ++i) {
    std::fill(dn.begin(), dn.end(), 0.0);
    for (std::size_t k = 0; k < rows; ++k) {
      const double w = a.at(i, k) + a.at(k, i);
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) dn[c] += w * n.at(k, c);
    }
    const double radial = dot(dn, n.row(i));
    for (std::size_t c = 0; c < d; ++c) {
      grad.at(i, c) = (dn[c] - radial * n.at(i, c)) / norms[i];
    }
  }
  return {std::max(loss, 0.0), std::move(grad)};
}

double nt_xent_loss(const Tensor& z, double tau) { return nt_xent_loss_and_grad(z, tau).loss; }

ad::Var nt_xent(ad::Graph& g, ad::Var z, double tau) {
  auto result = nt_xent_loss_and_grad(g.value(z), tau);
  const ad::Var ins[] = {z};
  return g.record("nt_xent", Tensor::scalar(result.loss), ins,
                  [grad = std::move(result.grad)](ad::Graph& g, std::size_t self) {
                    const ad::Var z = g.inputs_of(self)[0];
                    const double d = g.out_grad(self)[0];
                    auto dz = g.grad_accumulator(z).data();
                    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += d * grad[i];
                  });
}

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");
  if (batch_pairs < 2) throw ParameterError("batch_pairs must be >= 2 (N = 1 makes NT-Xent identically 0)");
  if (!(learning_rate >= 0.0)) throw ParameterError("learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
}

KeyValues TrainConfig::to_kv() const {
  KeyValues kv;
  kv.set("temperature", temperature);
  kv.set("batch_pairs", std::uint64_t{batch_pairs});
  kv.set("epochs", std::uint64_t{epochs});
  kv.set("learning_rate", learning_rate);
  kv.set("momentum", momentum);
  kv.set("seed", seed);
  kv.set("checkpoint_every", std::uint64_t{checkpoint_every});
  return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
  TrainConfig c;
  c.temperature = kv.get_double("temperature");
  c.batch_pairs = kv.get_u64("batch_pairs");
  c.epochs = kv.get_u64("epochs");
  c.learning_rate = kv.get_double("learning_rate");
  c.momentum = kv.get_double("momentum");
  c.seed = kv.get_u64("seed");
  c.checkpoint_every = kv.get_u64("checkpoint_every");
  c.validate();
  return c;
}

void LossTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < epoch_mean.size(); ++e) {
    out << (e + 1) << ',' << format_double(epoch_mean[e]) << '\n';
  }
}

LossTrace LossTrace::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "epoch,mean_loss") throw IoError(path.string() + ": bad loss trace header");
  LossTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(path.string() + ": malformed row '" + line + "'");
    trace.epoch_mean.push_back(parse_double(line.substr(comma + 1), path.string()));
  }
  return trace;
}

BatchGradients contrastive_batch_gradients(const EncoderModel& model,
                                           const std::vector<Tensor>& views, double tau,
                                           std::uint64_t repair_seed) {
  const std::size_t rows = views.size();
  const std::size_t pdim = model.config().proj_out_dim;
  if (rows % 2 != 0 || rows < 4) throw DimensionError("contrastive batch needs 2N >= 4 views");

  struct ViewGraph {
    ad::Graph graph;
    EncoderModel::Bound bound;
    ad::Var z;
  };
  std::vector<ViewGraph> graphs(rows);
  parallel::parallel_for(rows, [&](std::size_t v) {
    auto& vg = graphs[v];
    vg.bound = model.bind(vg.graph, true);
    const auto h = model.encode(vg.graph, vg.bound, vg.graph.constant_ref(views[v]));
    vg.z = model.project(vg.graph, vg.bound, h);
  });

  Tensor z({rows, pdim});
  BatchGradients out;
  for (std::size_t v = 0; v < rows; ++v) {
    const Tensor& zv = graphs[v].graph.value(graphs[v].z);
    std::copy(zv.data().begin(), zv.data().end(), z.row(v).begin());
    if (l2_norm(z.row(v)) == 0.0) {
      // A dead projection (all-zero after ReLU) would make cosine undefined.
      Rng rng(derive_seed(repair_seed, v));
      for (auto& x : z.row(v)) x = rng.uniform(-1e-6, 1e-6);
      ++out.repaired_rows;
      std::cerr << "warning: projection row " << v
                << " was exactly zero; perturbed by 1e-6 noise to keep NT-Xent defined\n";
    }
  }
  const auto loss = nt_xent_loss_and_grad(z, tau);
  out.loss = loss.loss;
  if (!std::isfinite(out.loss)) return out;

  parallel::parallel_for(rows, [&](std::size_t v) {
    auto& vg = graphs[v];
    Tensor seed({1, pdim});
    std::copy(loss.grad.row(v).begin(), loss.grad.row(v).end(), seed.data().begin());
    vg.graph.backward(vg.z, seed);
  });

  // Fixed-order reduction over views keeps the sum independent of threads.
  const auto params = model.parameters();
  out.grads.reserve(params.size());
  for (const Tensor* p : params) out.grads.emplace_back(p->shape(), 0.0);
  for (std::size_t v = 0; v < rows; ++v) {
    const auto& vg = graphs[v];
    std::vector<ad::Var> vars = vg.bound.backbone;
    vars.insert(vars.end(), {vg.bound.w1, vg.bound.b1, vg.bound.w2, vg.bound.b2});
    for (std::size_t p = 0; p < vars.size(); ++p) {
      const Tensor& gp = vg.graph.grad(vars[p]);
      auto dst = out.grads[p].data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gp[i];
    }
  }
  return out;
}

void SgdOptimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw DimensionError("optimizer: parameter/gradient count mismatch");
  if (velocity_.empty()) {
    for (const Tensor* p : params) velocity_.emplace_back(p->shape(), 0.0);
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    require_same_shape(*params[p], grads[p], "optimizer");
    auto w = params[p]->data();
    auto v = velocity_[p].data();
    const auto g = grads[p].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      w[i] -= learning_rate_ * v[i];
    }
  }
}

PretrainResult pretrain(const std::vector<Tensor>& images, const AugmentationSpec& spec,
                        EncoderModel model, const TrainConfig& cfg,
                        const CheckpointFn& on_checkpoint) {
  cfg.validate();
  spec.validate();
  const std::size_t n = cfg.batch_pairs;
  if (images.size() < n) {
    throw ParameterError("pretraining needs at least batch_pairs = " + std::to_string(n) +
                         " images, got " + std::to_string(images.size()));
  }
  const auto& ec = model.config();
  if (spec.output_h != ec.in_h || spec.output_w != ec.in_w) {
    throw DimensionError("augmentation output size does not match encoder input size");
  }

  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, "shuffle");
  const std::uint64_t view_seed = derive_seed(cfg.seed, "views");
  SgdOptimizer optimizer(cfg.learning_rate, cfg.momentum);
  PretrainResult result;
  std::vector<std::size_t> order(images.size());
  const std::size_t batches = images.size() / n;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(shuffle_seed, epoch));
    rng.shuffle(order.begin(), order.end());
    const std::uint64_t epoch_view_seed = derive_seed(view_seed, epoch);
    double epoch_loss = 0.0;

    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<Tensor> views(2 * n);
      parallel::parallel_for(n, [&](std::size_t j) {
        const std::size_t idx = order[b * n + j];
        auto [va, vb] = make_pair(spec, images[idx], epoch_view_seed, idx + 1);
        views[2 * j] = std::move(va);
        views[2 * j + 1] = std::move(vb);
      });
      const std::string where = "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1);
      BatchGradients grads;
      try {
        grads = contrastive_batch_gradients(model, views, cfg.temperature, derive_seed(epoch_view_seed, b));
      } catch (const NumericError& e) {
        throw DivergedTrainingError("pretraining diverged at " + where + " (" + e.what() +
                                    "); try a smaller learning rate");
      }
      result.repaired_rows += grads.repaired_rows;
      if (!std::isfinite(grads.loss)) {
        throw DivergedTrainingError("pretraining diverged: non-finite loss at " + where +
                                    "; try a smaller learning rate");
      }
      optimizer.step(model.parameters(), grads.grads);
      epoch_loss += grads.loss;
    }
    result.trace.epoch_mean.push_back(epoch_loss / static_cast<double>(batches));
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 && on_checkpoint) {
      on_checkpoint(epoch + 1, model);
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace synthlabel
