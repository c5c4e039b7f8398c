#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "synthlabel/augment.hpp"
#include "synthlabel/autodiff.hpp"
#include "synthlabel/encoder.hpp"
#include "synthlabel/kv.hpp"

namespace synthlabel {

/// u.v / (|u||v|). Throws DegenerateInputError on a zero vector.
double cosine_sim(std::span<const double> u, std::span<const double> v);

/// NT-Xent over a batch of 2N projections. Rows (2k, 2k+1), 0-based, are the
/// two views of sample k. For row i with partner p(i):
///   l_i = -s(i,p(i))/tau + log sum_{k != i} exp(s(i,k)/tau)
/// and the loss is the mean of l_i over all 2N rows.
double nt_xent_loss(const Tensor& z, double tau);

struct NtXentResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d z, same shape as z
};
NtXentResult nt_xent_loss_and_grad(const Tensor& z, double tau);

/// Graph op wrapping nt_xent_loss_and_grad; z is a [2N x D] node.
ad::Var nt_xent(ad::Graph& g, ad::Var z, double tau);

struct TrainConfig {
  double temperature = 0.5;
  std::size_t batch_pairs = 32;
  std::size_t epochs = 30;
  double learning_rate = 0.01;
  double momentum = 0.9;  // 0 gives plain SGD
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints

  void validate() const;
  KeyValues to_kv() const;
  static TrainConfig from_kv(const KeyValues& kv);
  bool operator==(const TrainConfig&) const = default;
};

struct LossTrace {
  std::vector<double> epoch_mean;

  void write_csv(const std::filesystem::path& path) const;
  static LossTrace read_csv(const std::filesystem::path& path);
};

/// Loss and per-parameter gradients of one contrastive batch of 2N views
/// (already augmented). Gradients follow EncoderModel::parameters() order.
struct BatchGradients {
  double loss = 0.0;
  std::vector<Tensor> grads;
  std::size_t repaired_rows = 0;
};
BatchGradients contrastive_batch_gradients(const EncoderModel& model,
                                           const std::vector<Tensor>& views, double tau,
                                           std::uint64_t repair_seed = 0);

/// Momentum SGD on a parameter list; velocity is kept by the caller.
class SgdOptimizer {
 public:
  SgdOptimizer(double learning_rate, double momentum)
      : learning_rate_(learning_rate), momentum_(momentum) {}

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

 private:
  double learning_rate_;
  double momentum_;
  std::vector<Tensor> velocity_;
};

struct PretrainResult {
  EncoderModel model;
  LossTrace trace;
  std::size_t repaired_rows = 0;
};

using CheckpointFn = std::function<void(std::size_t epoch, const EncoderModel& model)>;

/// Minimises NT-Xent over `images` (labeled and unlabeled alike). Each epoch
/// shuffles with a seed derived from (cfg.seed, epoch), drops the last
/// incomplete batch and draws views from make_pair. Results do not depend on
/// the worker count.
PretrainResult pretrain(const std::vector<Tensor>& images, const AugmentationSpec& spec,
                        EncoderModel model, const TrainConfig& cfg,
                        const CheckpointFn& on_checkpoint = {});

}  // namespace synthlabel
