#include <gtest/gtest.h>

#include <cmath>

#include "synthlabel/contrastive.hpp"
#include "synthlabel/error.hpp"
#include "synthlabel/grad_check.hpp"
#include "synthlabel/parallel.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace synthlabel;
using synthlabel::testing::random_tensor;
using namespace synthlabel::testing;
using synthlabel::testing::TempDir;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.in_h = c.in_w = 10;
  c.conv_layers = {{4, 3, 1, 2}};
  c.embed_dim = 8;
  c.proj_hidden_dim = 8;
  c.proj_out_dim = 4;
  return c;
}

std::vector<Tensor> tiny_images(std::size_t n, std::uint64_t seed) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_tensor({3, 10, 10}, derive_seed(seed, i), 0.0, 1.0));
  return out;
}

AugmentationSpec tiny_spec() {
  AugmentationSpec s;
  s.crop_scale_lo = 0.5;
  s.jitter_strength = 0.2;
  s.output_h = s.output_w = 10;
  return s;
}

}  // namespace

TEST(CosineSim, Examples) {
  const double v[] = {0.3, -2.0, 5.0};
  EXPECT_NEAR(cosine_sim(v, v), 1.0, 1e-15);
  const double e1[] = {1, 0}, e2[] = {0, 1}, m1[] = {-1, 0}, zero[] = {0, 0};
  EXPECT_EQ(cosine_sim(e1, e2), 0.0);
  EXPECT_EQ(cosine_sim(e1, m1), -1.0);
  EXPECT_THROW(cosine_sim(e1, zero), DegenerateInputError);
}

TEST(NtXent, EqualSimilaritiesGiveLn3) {
  // Identity rows: all cross similarities are 0.
  EXPECT_NEAR(nt_xent_loss(Tensor::matrix(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}), 1.0),
              std::log(3.0), 1e-12);
  // Regular simplex: pairwise similarity -1/3 for every pair, any tau.
  const double a = 1.0 / std::sqrt(3.0);
  const Tensor simplex = Tensor::matrix(4, 3, {a, a, a, a, -a, -a, -a, a, -a, -a, -a, a});
  for (double tau : {0.1, 0.5, 1.0, 3.0}) EXPECT_NEAR(nt_xent_loss(simplex, tau), std::log(3.0), 1e-12);
}

TEST(NtXent, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(5), d = 2 + rng.below(10);
    const double tau = rng.uniform(0.2, 2.0);
    const Tensor z = random_tensor({2 * n, d}, seed + 1000);
    EXPECT_NEAR(nt_xent_loss(z, tau), brute_force_nt_xent(z, tau), 1e-10) << "seed " << seed;
  }
}

TEST(NtXent, Errors) {
  EXPECT_THROW(nt_xent_loss(Tensor({4, 3}, 1.0), 0.0), ParameterError);
  EXPECT_THROW(nt_xent_loss(Tensor({2, 3}, 1.0), 0.5), DimensionError);
  EXPECT_THROW(nt_xent_loss(Tensor({5, 3}, 1.0), 0.5), DimensionError);
  Tensor z = random_tensor({4, 3}, 1);
  for (auto& v : z.row(2)) v = 0.0;
  EXPECT_THROW(nt_xent_loss(z, 0.5), DegenerateInputError);
}

TEST(NtXent, SwapViewsSymmetry) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor z = random_tensor({8, 5}, seed);
    Tensor swapped = z;
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t c = 0; c < 5; ++c) std::swap(swapped.at(2 * k, c), swapped.at(2 * k + 1, c));
    EXPECT_NEAR(nt_xent_loss(swapped, 0.5), nt_xent_loss(z, 0.5), 1e-13);
  }
}

TEST(NtXent, InvariantToRowRescaling) {
  // Power-of-two scale factors keep normalised rows bit-identical.
  const Tensor z = random_tensor({8, 5}, 3);
  for (std::size_t r = 0; r < 8; ++r) {
    Tensor scaled = z;
    for (auto& v : scaled.row(r)) v *= 4.0;
    EXPECT_EQ(nt_xent_loss(scaled, 0.5), nt_xent_loss(z, 0.5));
    for (auto& v : scaled.row(r)) v *= 1.7 / 4.0;
    EXPECT_NEAR(nt_xent_loss(scaled, 0.5), nt_xent_loss(z, 0.5), 1e-13);
  }
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double err = grad_check([](ad::Graph& g, ad::Var z) { return nt_xent(g, z, 0.5); },
                                  random_tensor({8, 8}, seed + 50));
    EXPECT_LT(err, 1e-4);
  }
}

TEST(NtXent, NonNegativeAndDecreasingAsPairsAlign) {
  // Positives at angle theta apart, negatives antipodal-ish; loss falls as theta -> 0.
  double previous = std::numeric_limits<double>::infinity();
  for (double theta : {1.2, 0.8, 0.4, 0.1, 0.0}) {
    const double c = std::cos(theta), s = std::sin(theta);
    const Tensor z = Tensor::matrix(4, 2, {1, 0, c, s, -1, 0, -c, -s});
    const double loss = nt_xent_loss(z, 0.5);
    EXPECT_GE(loss, 0.0);
    EXPECT_LT(loss, previous);
    previous = loss;
  }
  // And approaches 0 at lower temperature with perfect separation.
  const Tensor ideal = Tensor::matrix(4, 2, {1, 0, 1, 0, -1, 0, -1, 0});
  EXPECT_LT(nt_xent_loss(ideal, 0.05), 1e-15 + std::exp(-2.0 / 0.05) * 3);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_pairs = 1;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  EXPECT_EQ(TrainConfig::from_kv(c.to_kv()), c);
}

TEST(Pretrain, ZeroLearningRateLeavesParametersUnchanged) {
  const auto model = EncoderModel::init(tiny_encoder(), 1);
  TrainConfig cfg;
  cfg.batch_pairs = 4;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  const auto r = pretrain(tiny_images(9, 1), tiny_spec(), model, cfg);
  EXPECT_EQ(r.model, model);
  EXPECT_EQ(r.trace.epoch_mean.size(), 3u);
}

TEST(Pretrain, ZeroLearningRateTraceIsConstantForFixedViews) {
  // With fresh random views every epoch the loss naturally moves; with the
  // identity spec and one batch per epoch every epoch sees the same batch.
  const auto model = EncoderModel::init(tiny_encoder(), 2);
  TrainConfig cfg;
  cfg.batch_pairs = 6;
  cfg.epochs = 4;
  cfg.learning_rate = 0.0;
  // Identity views make the two rows of a pair equal; the loss is still defined.
  const auto r = pretrain(tiny_images(6, 2), AugmentationSpec::identity(10, 10), model, cfg);
  for (double l : r.trace.epoch_mean) EXPECT_NEAR(l, r.trace.epoch_mean.front(), 1e-12);
}

TEST(Pretrain, SmallStepDecreasesBatchLoss) {
  const auto model = EncoderModel::init(tiny_encoder(), 3);
  const auto images = tiny_images(4, 3);
  std::vector<Tensor> views;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto [a, b] = make_pair(tiny_spec(), images[i], 77, i + 1);
    views.push_back(a);
    views.push_back(b);
  }
  auto stepped = model;
  const auto before = contrastive_batch_gradients(model, views, 0.5);
  SgdOptimizer opt(1e-4, 0.0);
  opt.step(stepped.parameters(), before.grads);
  const auto after = contrastive_batch_gradients(stepped, views, 0.5);
  EXPECT_LT(after.loss, before.loss);
}

TEST(Pretrain, BatchGradientsMatchFiniteDifferences) {
  const auto model = EncoderModel::init(tiny_encoder(), 4);
  const auto images = tiny_images(2, 4);
  std::vector<Tensor> views;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto [a, b] = make_pair(tiny_spec(), images[i], 5, i + 1);
    views.push_back(a);
    views.push_back(b);
  }
  const auto g = contrastive_batch_gradients(model, views, 0.5);
  // Projection output bias: perturb each entry directly.
  const std::size_t pi = model.parameters().size() - 1;
  for (std::size_t i = 0; i < model.parameters()[pi]->size(); ++i) {
    auto plus = model, minus = model;
    (*plus.parameters()[pi])[i] += 1e-6;
    (*minus.parameters()[pi])[i] -= 1e-6;
    const double numeric = (contrastive_batch_gradients(plus, views, 0.5).loss -
                            contrastive_batch_gradients(minus, views, 0.5).loss) / 2e-6;
    EXPECT_NEAR(g.grads[pi][i], numeric, 1e-6);
  }
}

TEST(Pretrain, IndependentOfWorkerCount) {
  const auto model = EncoderModel::init(tiny_encoder(), 5);
  TrainConfig cfg;
  cfg.batch_pairs = 4;
  cfg.epochs = 2;
  cfg.learning_rate = 0.01;
  const auto images = tiny_images(10, 5);
  const int saved = parallel::worker_threads();
  parallel::set_worker_threads(1);
  const auto serial = pretrain(images, tiny_spec(), model, cfg);
  parallel::set_worker_threads(3);
  const auto threaded = pretrain(images, tiny_spec(), model, cfg);
  parallel::set_worker_threads(saved);
  EXPECT_EQ(serial.model, threaded.model);
  EXPECT_EQ(serial.trace.epoch_mean, threaded.trace.epoch_mean);
  EXPECT_NE(serial.model, model);
}

TEST(Pretrain, CheckpointsAndTraceCsv) {
  const auto model = EncoderModel::init(tiny_encoder(), 6);
  TrainConfig cfg;
  cfg.batch_pairs = 4;
  cfg.epochs = 4;
  cfg.learning_rate = 0.01;
  cfg.checkpoint_every = 2;
  std::vector<std::size_t> epochs;
  const auto r = pretrain(tiny_images(8, 6), tiny_spec(), model, cfg,
                          [&](std::size_t e, const EncoderModel&) { epochs.push_back(e); });
  EXPECT_EQ(epochs, (std::vector<std::size_t>{2, 4}));
  TempDir dir("trace");
  r.trace.write_csv(dir / "loss.csv");
  EXPECT_EQ(LossTrace::read_csv(dir / "loss.csv").epoch_mean, r.trace.epoch_mean);
}

TEST(Pretrain, Errors) {
  const auto model = EncoderModel::init(tiny_encoder(), 7);
  TrainConfig cfg;
  cfg.batch_pairs = 4;
  cfg.epochs = 1;
  EXPECT_THROW(pretrain(tiny_images(3, 7), tiny_spec(), model, cfg), ParameterError);
  auto spec = tiny_spec();
  spec.output_h = spec.output_w = 12;
  EXPECT_THROW(pretrain(tiny_images(8, 7), spec, model, cfg), DimensionError);
  cfg.learning_rate = 1e300;
  cfg.epochs = 5;
  EXPECT_THROW(pretrain(tiny_images(8, 7), tiny_spec(), model, cfg), DivergedTrainingError);
}
