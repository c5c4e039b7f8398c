#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "synthlabel/error.hpp"
#include "synthlabel/kernels.hpp"
#include "synthlabel/wrappers.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace synthlabel;
using namespace synthlabel::testing;

namespace {

Tensor xor_points() { return Tensor::matrix(4, 2, {0, 0, 1, 1, 0, 1, 1, 0}); }
const std::vector<int> kXorLabels{1, 1, -1, -1};

void expect_dual_feasible(const SvmModel& m) {
  double balance = 0.0;
  for (std::size_t i = 0; i < m.alphas.size(); ++i) {
    EXPECT_GT(m.alphas[i], 1e-8);
    EXPECT_LE(m.alphas[i], m.c);
    balance += m.alphas[i] * m.labels[i];
  }
  EXPECT_LE(std::abs(balance), 1e-6);
  EXPECT_EQ(m.support_vectors.dim(0), m.alphas.size());
  EXPECT_EQ(m.labels.size(), m.alphas.size());
}

// Two Gaussian blobs in 2-D, shifted apart far enough to be separable.
std::pair<Tensor, std::vector<int>> separable_points(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  Tensor x({n, 2});
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 2 ? 1 : -1;
    x.at(i, 0) = rng.uniform(-1, 1) + 2.5 * y[i];
    x.at(i, 1) = rng.uniform(-1, 1);
  }
  return {x, y};
}

}  // namespace

TEST(Rbf, Examples) {
  const double x[] = {0.3, -1.2};
  EXPECT_EQ(rbf_kernel(x, x, 0.7), 1.0);
  const double o[] = {0, 0}, e[] = {1, 0};
  EXPECT_NEAR(rbf_kernel(o, e, 1.0), std::exp(-1.0), 1e-15);
  double previous = 1.0;
  for (double d : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double p[] = {d, 0};
    const double k = rbf_kernel(o, p, 1.0);
    EXPECT_LT(k, previous);
    EXPECT_GE(k, 0.0);
    previous = k;
  }
  EXPECT_LT(previous, 1e-20);
  EXPECT_THROW(rbf_kernel(o, e, 0.0), ParameterError);
}

TEST(Rbf, ScaleGamma) {
  const Tensor h = Tensor::matrix(2, 2, {0, 0, 2, 2});  // var = 1
  EXPECT_DOUBLE_EQ(scale_gamma(h), 0.5);
  EXPECT_DOUBLE_EQ(scale_gamma(Tensor({3, 4}, 1.0)), 0.25);
}

TEST(Svm, XorIsSeparated) {
  const auto m = svm_train(xor_points(), kXorLabels, {10.0, 1.0, 1e-3, 200});
  expect_dual_feasible(m);
  const Tensor x = xor_points();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(svm_predict(m, x.row(i)).label, kXorLabels[i]);
}

TEST(Svm, SymmetricPairHasZeroBias) {
  const Tensor x = Tensor::matrix(2, 2, {1, 0.5, -1, -0.5});
  const std::vector<int> y{1, -1};
  const auto m = svm_train(x, y, {1.0, 0.5, 1e-3, 200});
  EXPECT_NEAR(m.bias, 0.0, 1e-6);
  ASSERT_EQ(m.alphas.size(), 2u);
  EXPECT_NEAR(m.alphas[0], m.alphas[1], 1e-12);
}

TEST(Svm, DualObjectiveMatchesDenseReference) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto [x, y] = separable_points(seed, 20);
    const SvmParams p{1.0, 0.5, 1e-3, 200};
    const auto m = svm_train(x, y, p);
    expect_dual_feasible(m);
    const Tensor gram = kernels::rbf_gram(kernels::Exec::serial, x, p.gamma);
    const double ref = reference_svm_dual(gram, y, p.c);
    EXPECT_LE(std::abs(m.dual_objective - ref), 1e-4 * std::abs(ref)) << "seed " << seed;
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(svm_predict(m, x.row(i)).label, y[i]);
  }
}

TEST(Svm, DualObjectiveHelper) {
  const Tensor gram = Tensor::matrix(2, 2, {1, 0.5, 0.5, 1});
  const double a[] = {0.5, 0.5};
  const int y[] = {1, -1};
  // sum(a) - 1/2 (a1^2 K11 + a2^2 K22 - 2 a1 a2 K12)
  EXPECT_DOUBLE_EQ(svm_dual_objective(a, y, gram), 1.0 - 0.5 * (0.25 + 0.25 - 0.25));
}

TEST(Svm, Errors) {
  const Tensor x = Tensor::matrix(2, 1, {0, 1});
  const std::vector<int> same{1, 1};
  EXPECT_THROW(svm_train(x, same, {}), ParameterError);
  const std::vector<int> bad{1, 0};
  EXPECT_THROW(svm_train(x, bad, {}), ParameterError);
  const std::vector<int> ok{1, -1};
  EXPECT_THROW(svm_train(x, ok, {1.0, 1.0, 0.0, 200}), ParameterError);
  EXPECT_THROW(svm_train(x, ok, {1.0, 1.0, 0.5, 200}), ParameterError);
  EXPECT_THROW(svm_train(x, ok, {0.0, 1.0, 1e-3, 200}), ParameterError);
  const auto m = svm_train(x, ok, {1.0, 1.0, 1e-3, 200});
  const double wrong[] = {1, 2};
  EXPECT_THROW(svm_predict(m, wrong), DimensionError);
}

TEST(Svm, IterationCapReportsViolation) {
  // Random labels need many more pair updates than the 100-step floor.
  Rng rng(9);
  Tensor x({200, 2});
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    x.at(i, 0) = rng.uniform(-1, 1);
    x.at(i, 1) = rng.uniform(-1, 1);
    y[i] = rng.below(2) ? 1 : -1;
  }
  try {
    svm_train(x, y, {100.0, 5.0, 1e-3, 0});
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.violation(), 1e-3);
  }
}

TEST(Svm, ZeroDecisionMapsToPositive) {
  SvmModel m;
  m.support_vectors = Tensor::matrix(2, 1, {-1, 1});
  m.alphas = {1.0, 1.0};
  m.labels = {1, -1};
  m.gamma = 1.0;
  const double mid[] = {0.0};
  EXPECT_EQ(svm_predict(m, mid).label, 1);
}

TEST(Knn, Examples) {
  const Tensor pts = Tensor::matrix(5, 1, {0, 1, 2, 10, 11});
  const std::vector<int> y{0, 0, 1, 1, 1};
  const auto m1 = knn_fit(pts, y, 1);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(knn_predict(m1, pts.row(i)).label, y[i]);
  const auto m3 = knn_fit(pts, y, 3);
  const double q[] = {0.9};
  EXPECT_EQ(knn_predict(m3, q).label, 0);
  EXPECT_NEAR(knn_predict(m3, q).score, 1.0 / 3.0, 1e-15);
  // Distance tie: 0.5 is equidistant from 0 and 1; both class 0 anyway, and
  // index order decides which neighbour enters first.
  const Tensor tie = Tensor::matrix(2, 1, {0, 1});
  const std::vector<int> ty{1, 0};
  const double half[] = {0.5};
  EXPECT_EQ(knn_predict(knn_fit(tie, ty, 1), half).label, 1);
}

TEST(Knn, Errors) {
  const Tensor pts = Tensor::matrix(3, 1, {0, 1, 2});
  const std::vector<int> y{0, 1, 1};
  EXPECT_THROW(knn_fit(pts, y, 2), ParameterError);
  EXPECT_THROW(knn_fit(pts, y, 5), ParameterError);
  EXPECT_THROW(knn_fit(pts, y, 0), ParameterError);
  const double q[] = {0, 0};
  EXPECT_THROW(knn_predict(knn_fit(pts, y, 1), q), DimensionError);
}

TEST(LogReg, ZeroModelPredictsClassOne) {
  LogRegModel m;
  m.weights = Tensor({3});
  const double h[] = {1, -2, 3};
  const auto p = logreg_predict(m, h);
  EXPECT_EQ(p.score, 0.5);
  EXPECT_EQ(p.label, 1);
}

TEST(LogReg, SymmetricDataKeepsZeroBias) {
  const Tensor h = Tensor::matrix(4, 2, {1, 2, -1, -2, 0.5, -1, -0.5, 1});
  const std::vector<int> y{1, 0, 1, 0};
  for (bool standardize : {false, true}) {
    const auto m = logreg_train(h, y, {0.5, 200, 1e-3, standardize});
    EXPECT_NEAR(m.bias, 0.0, 1e-8);
  }
}

TEST(LogReg, GradientMatchesFiniteDifferences) {
  const Tensor h = random_tensor({12, 4}, 1);
  std::vector<int> y(12);
  for (std::size_t i = 0; i < 12; ++i) y[i] = static_cast<int>(i % 3 == 0);
  const Tensor w = random_tensor({4}, 2);
  const double b = 0.3, l2 = 0.05;
  const auto g = logreg_loss_and_grad(h, y, w, b, l2);
  const double eps = 1e-6;
  for (std::size_t j = 0; j < 4; ++j) {
    Tensor wp = w, wm = w;
    wp[j] += eps;
    wm[j] -= eps;
    const double num = (logreg_loss_and_grad(h, y, wp, b, l2).loss - logreg_loss_and_grad(h, y, wm, b, l2).loss) / (2 * eps);
    EXPECT_LT(std::abs(num - g.grad_w[j]) / std::max({1.0, std::abs(num), std::abs(g.grad_w[j])}), 1e-6);
  }
  const double numb = (logreg_loss_and_grad(h, y, w, b + eps, l2).loss - logreg_loss_and_grad(h, y, w, b - eps, l2).loss) / (2 * eps);
  EXPECT_LT(std::abs(numb - g.grad_b), 1e-6);
}

TEST(LogReg, SeparableDataAndMonotoneTrace) {
  const Tensor h = Tensor::matrix(6, 1, {-3, -2, -1, 1, 2, 3});
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const auto m = logreg_train(h, y, {0.1, 300, 0.01, false});
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(logreg_predict(m, h.row(i)).label, y[i]);
  for (std::size_t e = 1; e < m.loss_trace.size(); ++e) EXPECT_LE(m.loss_trace[e], m.loss_trace[e - 1] + 1e-15);
}

TEST(LogReg, DivergenceIsReported) {
  const Tensor h = Tensor::matrix(4, 1, {-30, -20, 20, 30});
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_THROW(logreg_train(h, y, {1e4, 50, 10.0, false}), DivergedTrainingError);
  const std::vector<int> bad{0, 2, 1, 0};
  EXPECT_THROW(logreg_train(h, bad, {}), ParameterError);
}

TEST(WrapperIo, RoundTripAllKinds) {
  const Tensor x = xor_points();
  const std::vector<int> pm = kXorLabels;
  const std::vector<int> bin{1, 1, 0, 0};
  const std::vector<WrapperModel> models = {svm_train(x, pm, {10.0, 1.0, 1e-3, 200}), knn_fit(x, bin, 3),
                                            logreg_train(x, bin, {})};
  for (const auto& m : models) {
    std::stringstream ss;
    write_wrapper(ss, m);
    const auto back = read_wrapper(ss);
    EXPECT_EQ(kind_of(back), kind_of(m));
    EXPECT_EQ(back, m);
    EXPECT_EQ(wrapper_hash(back), wrapper_hash(m));
    EXPECT_EQ(embedding_dim(back), 2u);
  }
  EXPECT_EQ(parse_wrapper_kind("knn"), WrapperKind::knn);
  EXPECT_EQ(to_string(WrapperKind::logreg), "logreg");
  EXPECT_THROW(parse_wrapper_kind("forest"), Error);
  std::stringstream garbage("not a wrapper");
  EXPECT_THROW(read_wrapper(garbage), Error);
}
