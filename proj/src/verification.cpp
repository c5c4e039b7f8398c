#include "synthlabel/verification.hpp"

#include <functional>

#include "synthlabel/contrastive.hpp"
#include "synthlabel/encoder.hpp"
#include "synthlabel/grad_check.hpp"
#include "synthlabel/rng.hpp"

namespace synthlabel {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Scalar probe: sum(y * r) for a fixed random r, so every output element
// gets a distinct upstream gradient.
ad::Var probe(ad::Graph& g, ad::Var y, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(g, ad::mul(g, y, g.constant(random_tensor(g.value(y).shape(), rng))));
}

}  // namespace

std::vector<GradCheckResult> run_grad_checks(double tolerance, std::uint64_t seed) {
  struct Case {
    std::string name;
    Tensor point;
    ScalarGraphFn fn;
  };
  Rng rng(derive_seed(seed, "grad-check"));
  const std::uint64_t ps = derive_seed(seed, "probe");
  std::vector<Case> cases;

  {
    const Tensor b = random_tensor({4, 3}, rng);
    cases.push_back({"matmul (left)", random_tensor({2, 4}, rng), [b, ps](ad::Graph& g, ad::Var x) {
                       return probe(g, ad::matmul(g, x, g.constant(b)), ps);
                     }});
    const Tensor a = random_tensor({2, 4}, rng);
    cases.push_back({"matmul (right)", random_tensor({4, 3}, rng), [a, ps](ad::Graph& g, ad::Var x) {
                       return probe(g, ad::matmul(g, g.constant(a), x), ps);
                     }});
  }
  for (std::size_t stride : {1, 2}) {
    const Tensor k = random_tensor({3, 2, 3, 3}, rng);
    cases.push_back({"conv2d input (stride " + std::to_string(stride) + ")", random_tensor({2, 7, 6}, rng),
                     [k, ps, stride](ad::Graph& g, ad::Var x) {
                       return probe(g, ad::conv2d(g, x, g.constant(k), stride), ps);
                     }});
    const Tensor in = random_tensor({2, 7, 6}, rng);
    cases.push_back({"conv2d kernels (stride " + std::to_string(stride) + ")", random_tensor({3, 2, 3, 3}, rng),
                     [in, ps, stride](ad::Graph& g, ad::Var x) {
                       return probe(g, ad::conv2d(g, g.constant(in), x, stride), ps);
                     }});
  }
  {
    const Tensor x3 = random_tensor({3, 4, 4}, rng);
    cases.push_back({"add_bias (channels)", random_tensor({3}, rng), [x3, ps](ad::Graph& g, ad::Var b) {
                       return probe(g, ad::add_bias(g, g.constant(x3), b), ps);
                     }});
    const Tensor b3 = random_tensor({3}, rng);
    cases.push_back({"add_bias (input)", random_tensor({3, 4, 4}, rng), [b3, ps](ad::Graph& g, ad::Var x) {
                       return probe(g, ad::add_bias(g, x, g.constant(b3)), ps);
                     }});
    const Tensor x2 = random_tensor({2, 5}, rng);
    cases.push_back({"add_bias (rows)", random_tensor({5}, rng), [x2, ps](ad::Graph& g, ad::Var b) {
                       return probe(g, ad::add_bias(g, g.constant(x2), b), ps);
                     }});
  }
  cases.push_back({"relu", random_tensor({3, 5}, rng),
                   [ps](ad::Graph& g, ad::Var x) { return probe(g, ad::relu(g, x), ps); }});
  cases.push_back({"max_pool2d", random_tensor({2, 6, 5}, rng),
                   [ps](ad::Graph& g, ad::Var x) { return probe(g, ad::max_pool2d(g, x, 2), ps); }});
  cases.push_back({"mean_reduce", random_tensor({3, 4}, rng),
                   [](ad::Graph& g, ad::Var x) { return ad::mean_reduce(g, ad::mul(g, x, x)); }});
  cases.push_back({"sum", random_tensor({3, 4}, rng),
                   [](ad::Graph& g, ad::Var x) { return ad::sum(g, ad::mul(g, x, x)); }});
  cases.push_back({"mul", random_tensor({2, 3}, rng),
                   [ps](ad::Graph& g, ad::Var x) { return probe(g, ad::mul(g, x, x), ps); }});
  cases.push_back({"reshape", random_tensor({2, 6}, rng),
                   [ps](ad::Graph& g, ad::Var x) { return probe(g, ad::reshape(g, x, {3, 4}), ps); }});
  cases.push_back({"standardize_channels", random_tensor({2, 4, 3}, rng), [ps](ad::Graph& g, ad::Var x) {
                     return probe(g, ad::standardize_channels(g, x), ps);
                   }});
  cases.push_back({"softmax_cross_entropy", random_tensor({4, 3}, rng, -2.0, 2.0), [](ad::Graph& g, ad::Var x) {
                     const std::size_t labels[] = {0, 2, 1, 2};
                     return ad::softmax_cross_entropy(g, x, labels);
                   }});
  cases.push_back({"nt_xent (N=4, dim 8, tau=0.5)", random_tensor({8, 8}, rng),
                   [](ad::Graph& g, ad::Var z) { return nt_xent(g, z, 0.5); }});
  {
    // End-to-end through encoder and projection head w.r.t. the input image.
    EncoderConfig cfg;
    cfg.in_h = cfg.in_w = 10;
    cfg.conv_layers = {{3, 3, 1, 2}};
    cfg.embed_dim = 6;
    cfg.proj_hidden_dim = 5;
    cfg.proj_out_dim = 4;
    auto model = std::make_shared<EncoderModel>(EncoderModel::init(cfg, derive_seed(seed, "encoder")));
    cases.push_back({"encoder + projection", random_tensor({3, 10, 10}, rng, 0.0, 1.0),
                     [model, ps](ad::Graph& g, ad::Var x) {
                       const auto bound = model->bind(g, false);
                       return probe(g, model->project(g, bound, model->encode(g, bound, x)), ps);
                     }});
  }

  std::vector<GradCheckResult> out;
  for (const auto& c : cases) {
    const double err = grad_check(c.fn, c.point);
    out.push_back({c.name, err, err < tolerance});
  }
  return out;
}

}  // namespace synthlabel
