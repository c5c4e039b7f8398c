#include <gtest/gtest.h>

#include <cmath>

#include "synthlabel/autodiff.hpp"
#include "synthlabel/error.hpp"
#include "synthlabel/grad_check.hpp"
#include "synthlabel/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace synthlabel;
using synthlabel::testing::random_tensor;
using namespace synthlabel::testing;

namespace {

// sum(y * r) with a fixed random r.
ad::Var weighted_sum(ad::Graph& g, ad::Var y, std::uint64_t seed) {
  return ad::sum(g, ad::mul(g, y, g.constant(random_tensor(g.value(y).shape(), seed))));
}

}  // namespace

TEST(Matmul, Examples) {
  ad::Graph g;
  const auto eye = g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  const auto m = g.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(g.value(ad::matmul(g, eye, m)), Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const auto a = g.constant(Tensor::matrix(1, 2, {1, 2}));
  const auto b = g.constant(Tensor::matrix(2, 1, {3, 4}));
  EXPECT_EQ(g.value(ad::matmul(g, a, b)), Tensor::matrix(1, 1, {11}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  ad::Graph g;
  const auto a = g.constant(Tensor({2, 3}));
  const auto b = g.constant(Tensor({4, 2}));
  try {
    ad::matmul(g, a, b);
    FAIL();
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("[2x3]"), std::string::npos);
    EXPECT_NE(what.find("[4x2]"), std::string::npos);
  }
}

TEST(Matmul, GradientOfSumIsColumnSumOfB) {
  const Tensor a = random_tensor({3, 4}, 1);
  const Tensor b = random_tensor({4, 2}, 2);
  ad::Graph g;
  const auto va = g.parameter(a);
  g.backward(ad::sum(g, ad::matmul(g, va, g.constant(b))));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(g.grad(va).at(i, k), b.at(k, 0) + b.at(k, 1), 1e-15);
  const double err = grad_check(
      [&](ad::Graph& g2, ad::Var x) { return ad::sum(g2, ad::matmul(g2, x, g2.constant(b))); }, a);
  EXPECT_LT(err, 1e-6);
}

TEST(Conv2d, IdentityKernel) {
  const Tensor x = random_tensor({1, 5, 4}, 3);
  ad::Graph g;
  const auto y = ad::conv2d(g, g.constant(x), g.constant(Tensor({1, 1, 1, 1}, 1.0)), 1);
  EXPECT_EQ(g.value(y), x);
}

TEST(Conv2d, CountingWindow) {
  ad::Graph g;
  const auto y = ad::conv2d(g, g.constant(Tensor({1, 3, 3}, 1.0)), g.constant(Tensor({1, 1, 2, 2}, 1.0)), 1);
  EXPECT_EQ(g.value(y), Tensor({1, 2, 2}, 4.0));
}

TEST(Conv2d, MatchesNaiveLoopAndFiniteDifferences) {
  for (std::size_t stride : {1u, 2u}) {
    const Tensor x = random_tensor({2, 8, 8}, 10 + stride);
    const Tensor k = random_tensor({3, 2, 3, 3}, 20 + stride);
    ad::Graph g;
    const auto y = ad::conv2d(g, g.constant(x), g.constant(k), stride);
    const Tensor ref = naive_conv(x, k, stride);
    ASSERT_EQ(g.value(y).shape(), ref.shape());
    EXPECT_LT(synthlabel::testing::max_abs_diff(g.value(y), ref), 1e-12);

    const double ex = grad_check(
        [&](ad::Graph& g2, ad::Var v) { return weighted_sum(g2, ad::conv2d(g2, v, g2.constant(k), stride), 5); }, x);
    const double ek = grad_check(
        [&](ad::Graph& g2, ad::Var v) { return weighted_sum(g2, ad::conv2d(g2, g2.constant(x), v, stride), 5); }, k);
    EXPECT_LT(ex, 1e-5);
    EXPECT_LT(ek, 1e-5);
  }
}

TEST(Conv2d, KernelLargerThanInput) {
  ad::Graph g;
  EXPECT_THROW(ad::conv2d(g, g.constant(Tensor({1, 2, 2})), g.constant(Tensor({1, 1, 3, 3})), 1), DimensionError);
  EXPECT_THROW(ad::conv2d(g, g.constant(Tensor({2, 4, 4})), g.constant(Tensor({1, 1, 3, 3})), 1), DimensionError);
}

TEST(Relu, Definition) {
  ad::Graph g;
  EXPECT_EQ(g.value(ad::relu(g, g.constant(Tensor::vector({-1, 0, 2})))), Tensor::vector({0, 0, 2}));
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLn2) {
  for (std::size_t label : {0u, 1u}) {
    ad::Graph g;
    const std::size_t labels[] = {label};
    const auto l = ad::softmax_cross_entropy(g, g.constant(Tensor::matrix(1, 2, {0.3, 0.3})), labels);
    EXPECT_NEAR(g.value(l)[0], std::log(2.0), 1e-15);
  }
}

TEST(SoftmaxCrossEntropy, LabelOutOfRange) {
  ad::Graph g;
  const std::size_t labels[] = {2};
  EXPECT_THROW(ad::softmax_cross_entropy(g, g.constant(Tensor({1, 2})), labels), ParameterError);
  const std::size_t two[] = {0, 1};
  EXPECT_THROW(ad::softmax_cross_entropy(g, g.constant(Tensor({1, 2})), two), DimensionError);
}

TEST(SoftmaxCrossEntropy, LargeLogitsStayFinite) {
  ad::Graph g;
  const std::size_t labels[] = {1};
  const auto l = ad::softmax_cross_entropy(g, g.constant(Tensor::matrix(1, 2, {1000.0, -1000.0})), labels);
  EXPECT_NEAR(g.value(l)[0], 2000.0, 1e-9);
}

TEST(MaxPool, RoutesGradientToArgmax) {
  ad::Graph g;
  const Tensor x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto v = g.parameter(x);
  const auto y = ad::max_pool2d(g, v, 2);
  EXPECT_EQ(g.value(y), Tensor({1, 1, 1}, 4.0));
  g.backward(ad::sum(g, y));
  EXPECT_EQ(g.grad(v), Tensor({1, 2, 2}, std::vector<double>{0, 0, 0, 1}));
}

TEST(MeanReduceAndBias, Values) {
  ad::Graph g;
  EXPECT_EQ(g.value(ad::mean_reduce(g, g.constant(Tensor::vector({1, 2, 3, 6}))))[0], 3.0);
  const auto y = ad::add_bias(g, g.constant(Tensor({2, 1, 2}, 1.0)), g.constant(Tensor::vector({1, 2})));
  EXPECT_EQ(g.value(y), Tensor({2, 1, 2}, std::vector<double>{2, 2, 3, 3}));
  EXPECT_THROW(ad::add_bias(g, g.constant(Tensor({3, 2, 2})), g.constant(Tensor({2}))), DimensionError);
}

TEST(StandardizeChannels, ZeroMeanUnitVariance) {
  const Tensor x = random_tensor({3, 6, 5}, 4, 0.2, 0.9);
  ad::Graph g;
  const Tensor& y = g.value(ad::standardize_channels(g, g.constant(x), 1e-12));
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 30; ++i) m += y[c * 30 + i];
    m /= 30;
    for (std::size_t i = 0; i < 30; ++i) v += (y[c * 30 + i] - m) * (y[c * 30 + i] - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 30, 1.0, 1e-9);
  }
  // Constant planes map to zero.
  ad::Graph g2;
  EXPECT_EQ(g2.value(ad::standardize_channels(g2, g2.constant(Tensor({1, 2, 2}, 0.7)))), Tensor({1, 2, 2}));
}

TEST(GradCheck, Examples) {
  const auto sum_sq = [](ad::Graph& g, ad::Var x) { return ad::sum(g, ad::mul(g, x, x)); };
  const Tensor p = Tensor::vector({1, 2, 3});
  ad::Graph g;
  const auto v = g.parameter(p);
  g.backward(sum_sq(g, v));
  EXPECT_EQ(g.grad(v), Tensor::vector({2, 4, 6}));
  EXPECT_LT(grad_check(sum_sq, p), 1e-8);

  const auto constant = [](ad::Graph& g2, ad::Var) { return g2.constant(Tensor::scalar(3.0)); };
  EXPECT_EQ(grad_check(constant, p), 0.0);
}

TEST(GradCheck, Errors) {
  const auto sum_sq = [](ad::Graph& g, ad::Var x) { return ad::sum(g, ad::mul(g, x, x)); };
  EXPECT_THROW(grad_check(sum_sq, Tensor({2}), 0.0), ParameterError);
  EXPECT_THROW(grad_check(sum_sq, Tensor({2}), 0.1), ParameterError);
  const auto nan = [](ad::Graph& g, ad::Var) {
    return g.constant(Tensor::scalar(std::numeric_limits<double>::quiet_NaN()));
  };
  EXPECT_THROW(grad_check(nan, Tensor({2})), Error);
  const auto not_scalar = [](ad::Graph&, ad::Var x) { return x; };
  EXPECT_THROW(grad_check(not_scalar, Tensor({2})), DimensionError);
}

// Every differentiable op, 10 random points each, epsilon 1e-5.
TEST(GradCheck, EveryOpAtRandomPoints) {
  struct Case {
    const char* name;
    Shape shape;
    ScalarGraphFn fn;
  };
  const Tensor b43 = random_tensor({4, 3}, 100);
  const Tensor k = random_tensor({2, 2, 3, 3}, 101);
  const Tensor img = random_tensor({2, 7, 7}, 102);
  const Tensor bias = random_tensor({2}, 103);
  const std::size_t labels[] = {1, 0, 2};
  const std::vector<Case> cases = {
      {"matmul", {2, 4}, [&](ad::Graph& g, ad::Var x) { return weighted_sum(g, ad::matmul(g, x, g.constant(b43)), 1); }},
      {"conv2d input", {2, 7, 7}, [&](ad::Graph& g, ad::Var x) { return weighted_sum(g, ad::conv2d(g, x, g.constant(k), 2), 2); }},
      {"conv2d kernels", {2, 2, 3, 3}, [&](ad::Graph& g, ad::Var x) { return weighted_sum(g, ad::conv2d(g, g.constant(img), x, 1), 3); }},
      {"add_bias", {2}, [&](ad::Graph& g, ad::Var x) { return weighted_sum(g, ad::add_bias(g, g.constant(img), x), 4); }},
      {"relu", {3, 4}, [](ad::Graph& g, ad::Var x) { return weighted_sum(g, ad::relu(g, x), 5); }},
      {"max_pool2d", {2, 6, 6}, [](ad::Graph& g, ad::Var x) { return weighted_sum(g, ad::max_pool2d(g, x, 2), 6); }},
      {"mean_reduce", {3, 4}, [](ad::Graph& g, ad::Var x) { return ad::mean_reduce(g, ad::mul(g, x, x)); }},
      {"mul", {5}, [](ad::Graph& g, ad::Var x) { return weighted_sum(g, ad::mul(g, x, x), 7); }},
      {"reshape", {2, 6}, [](ad::Graph& g, ad::Var x) { return weighted_sum(g, ad::reshape(g, x, {3, 4}), 8); }},
      {"standardize_channels", {2, 3, 3}, [](ad::Graph& g, ad::Var x) { return weighted_sum(g, ad::standardize_channels(g, x), 9); }},
      {"softmax_cross_entropy", {3, 3}, [&](ad::Graph& g, ad::Var x) { return ad::softmax_cross_entropy(g, x, labels); }},
  };
  for (const auto& c : cases) {
    for (std::uint64_t p = 0; p < 10; ++p) {
      const double err = grad_check(c.fn, random_tensor(c.shape, derive_seed(p, c.name)), 1e-5);
      EXPECT_LT(err, 1e-4) << c.name << " point " << p;
    }
  }
  (void)bias;
}

TEST(Graph, BackwardTwiceGivesIdenticalGradients) {
  const Tensor x = random_tensor({2, 6, 6}, 4);
  const Tensor k = random_tensor({3, 2, 3, 3}, 5);
  ad::Graph g;
  const auto vx = g.parameter(x);
  const auto vk = g.parameter(k);
  const auto loss = weighted_sum(g, ad::relu(g, ad::conv2d(g, vx, vk, 1)), 6);
  g.backward(loss);
  const Tensor gx = g.grad(vx), gk = g.grad(vk);
  g.backward(loss);
  EXPECT_EQ(g.grad(vx), gx);
  EXPECT_EQ(g.grad(vk), gk);
  EXPECT_EQ(g.grad(vx).shape(), x.shape());
  EXPECT_EQ(g.grad(vk).shape(), k.shape());
}

TEST(Graph, OpsDoNotMutateInputs) {
  const Tensor x = random_tensor({2, 6, 6}, 7);
  const Tensor k = random_tensor({3, 2, 3, 3}, 8);
  const Tensor x0 = x, k0 = k;
  ad::Graph g;
  const auto vx = g.parameter(x);
  const auto vk = g.parameter(k);
  auto y = ad::conv2d(g, vx, vk, 1);
  y = ad::relu(g, y);
  y = ad::max_pool2d(g, y, 2);
  y = ad::standardize_channels(g, y);
  g.backward(ad::mean_reduce(g, y));
  EXPECT_EQ(x, x0);
  EXPECT_EQ(k, k0);
}

TEST(Graph, NonScalarRootNeedsSeed) {
  ad::Graph g;
  const auto v = g.parameter_owned(Tensor({3}, 1.0));
  EXPECT_THROW(g.backward(v), DimensionError);
  g.backward(v, Tensor::vector({1, 2, 3}));
  EXPECT_EQ(g.grad(v), Tensor::vector({1, 2, 3}));
}

TEST(Graph, NonFiniteValueIsReported) {
  ad::Graph g;
  const auto big = g.constant(Tensor({1}, 1e200));
  EXPECT_THROW(ad::mul(g, big, big), NumericError);
}
