#pragma once

// Embedding-space classifiers used to produce synthetic labels.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "synthlabel/tensor.hpp"

namespace synthlabel {

// --- RBF-kernel SVM ---------------------------------------------------------

/// exp(-gamma * |u - v|^2)
double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma);

/// 1 / (dim * var(H)) over all entries of H; 1 / dim when H is constant.
double scale_gamma(const Tensor& embeddings);

struct SvmParams {
  double c = 1.0;
  double gamma = 0.0;  // <= 0 selects scale_gamma
  double tol = 1e-3;
  std::size_t max_passes = 200;  // iteration cap is max(max_passes * n, 100)
};

struct SvmModel {
  Tensor support_vectors;  // S x D
  std::vector<double> alphas;
  std::vector<int> labels;  // +1 / -1
  double bias = 0.0;
  double gamma = 1.0;
  double c = 1.0;
  // Training diagnostics, not serialized.
  double dual_objective = 0.0;
  std::size_t iterations = 0;

  bool operator==(const SvmModel& o) const {
    return support_vectors == o.support_vectors && alphas == o.alphas && labels == o.labels &&
           bias == o.bias && gamma == o.gamma && c == o.c;
  }
};

/// SMO on the soft-margin dual with second-order working-set selection and a
/// full precomputed Gram matrix. Labels are +1/-1 with both classes present.
/// Throws ConvergenceError carrying the final KKT violation if the iteration
/// cap is hit.
SvmModel svm_train(const Tensor& embeddings, std::span<const int> labels, const SvmParams& params);

/// sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
double svm_dual_objective(std::span<const double> alphas, std::span<const int> labels,
                          const Tensor& gram);

struct Prediction {
  int label = 0;
  double score = 0.0;
};

/// label = sign(sum alpha_i y_i K(x_i, h) + b), with 0 mapped to +1.
Prediction svm_predict(const SvmModel& model, std::span<const double> h);

// --- kNN ----------------------------------------------------------------------

struct KnnModel {
  Tensor points;  // M x D
  std::vector<int> labels;
  std::size_t k = 5;

  bool operator==(const KnnModel&) const = default;
};

/// k must be odd and <= number of points.
KnnModel knn_fit(const Tensor& embeddings, std::span<const int> labels, std::size_t k);
/// Majority among the k nearest (L2, distance ties broken by index); score is
/// the fraction of neighbours voting for class 1.
Prediction knn_predict(const KnnModel& model, std::span<const double> h);

// --- Logistic regression ------------------------------------------------------

struct LogRegParams {
  double learning_rate = 0.5;
  std::size_t epochs = 500;
  double l2 = 1e-3;
  /// Fit on standardised features and fold the scaling back into the weights.
  bool standardize = true;
};

struct LogRegModel {
  Tensor weights;  // D
  double bias = 0.0;
  std::vector<double> loss_trace;  // not serialized

  bool operator==(const LogRegModel& o) const { return weights == o.weights && bias == o.bias; }
};

struct LogRegLoss {
  double loss = 0.0;
  Tensor grad_w;
  double grad_b = 0.0;
};
/// Mean binary cross-entropy plus (l2/2)|w|^2, labels in {0,1}.
LogRegLoss logreg_loss_and_grad(const Tensor& embeddings, std::span<const int> labels,
                                const Tensor& weights, double bias, double l2);

/// Full-batch gradient descent from w = 0, b = 0. Throws
/// DivergedTrainingError if the loss exceeds ten times its initial value.
LogRegModel logreg_train(const Tensor& embeddings, std::span<const int> labels,
                         const LogRegParams& params);
/// label 1 iff sigmoid(w.h + b) >= 0.5; score is the sigmoid.
Prediction logreg_predict(const LogRegModel& model, std::span<const double> h);

// --- Tagged union and persistence ----------------------------------------------

enum class WrapperKind { svm, knn, logreg };
std::string_view to_string(WrapperKind kind);
WrapperKind parse_wrapper_kind(std::string_view text);

using WrapperModel = std::variant<SvmModel, KnnModel, LogRegModel>;
WrapperKind kind_of(const WrapperModel& model);
std::size_t embedding_dim(const WrapperModel& model);

/// Sectioned binary: kind tag, canonical key/value hyperparameters, tensor
/// count, then TNSR tensors.
void write_wrapper(std::ostream& out, const WrapperModel& model);
WrapperModel read_wrapper(std::istream& in);
void save_wrapper(const std::filesystem::path& path, const WrapperModel& model);
WrapperModel load_wrapper(const std::filesystem::path& path);
std::string wrapper_hash(const WrapperModel& model);

}  // namespace synthlabel
