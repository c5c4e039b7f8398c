#include <cmath>
#include <string>

#include "synthlabel/error.hpp"
#include "synthlabel/wrappers.hpp"

namespace synthlabel {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

void check_binary(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw ParameterError("logistic regression labels must be 0 or 1");
  }
}

}  // namespace

LogRegLoss logreg_loss_and_grad(const Tensor& embeddings, std::span<const int> labels,
                                const Tensor& weights, double bias, double l2) {
  if (embeddings.rank() != 2 || weights.size() != embeddings.dim(1)) {
    throw DimensionError("logreg: embeddings " + shape_str(embeddings.shape()) +
                         " do not match weights " + shape_str(weights.shape()));
  }
  if (labels.size() != embeddings.dim(0)) throw DimensionError("logreg: label count does not match rows");
  const std::size_t n = embeddings.dim(0), d = embeddings.dim(1);
  LogRegLoss out;
  out.grad_w = Tensor({d});
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = embeddings.row(r);
    const double t = dot(weights.data(), x) + bias;
    // -[y log s(t) + (1-y) log(1 - s(t))] = softplus(t) - y t
    out.loss += softplus(t) - labels[r] * t;
    const double err = sigmoid(t) - labels[r];
    for (std::size_t c = 0; c < d; ++c) out.grad_w[c] += err * x[c];
    out.grad_b += err;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss *= inv_n;
  out.grad_b *= inv_n;
  double wsq = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    out.grad_w[c] = out.grad_w[c] * inv_n + l2 * weights[c];
    wsq += weights[c] * weights[c];
  }
  out.loss += 0.5 * l2 * wsq;
  return out;
}

LogRegModel logreg_train(const Tensor& embeddings, std::span<const int> labels,
                         const LogRegParams& params) {
  check_binary(labels);
  if (embeddings.rank() != 2) throw DimensionError("logreg_train expects an N x D matrix");
  if (!(params.l2 >= 0.0)) throw ParameterError("l2 must be >= 0");
  if (!(params.learning_rate >= 0.0)) throw ParameterError("learning rate must be >= 0");
  const std::size_t n = embeddings.dim(0), d = embeddings.dim(1);

  std::vector<double> mean(d, 0.0), scale(d, 1.0);
  Tensor x = embeddings;
  if (params.standardize) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) mean[c] += x.at(r, c);
    for (auto& m : mean) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) var[c] += (x.at(r, c) - mean[c]) * (x.at(r, c) - mean[c]);
    for (std::size_t c = 0; c < d; ++c) {
      const double sd = std::sqrt(var[c] / static_cast<double>(n));
      scale[c] = sd > 1e-12 ? sd : 1.0;
    }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) x.at(r, c) = (x.at(r, c) - mean[c]) / scale[c];
  }

  LogRegModel model;
  model.weights = Tensor({d});
  double initial = 0.0;
  for (std::size_t e = 0; e <= params.epochs; ++e) {
    const auto step = logreg_loss_and_grad(x, labels, model.weights, model.bias, params.l2);
    if (e == 0) initial = step.loss;
    if (!std::isfinite(step.loss) || step.loss > 10.0 * initial) {
      throw DivergedTrainingError("logistic regression diverged at epoch " + std::to_string(e) +
                                  "; try a smaller learning rate");
    }
    model.loss_trace.push_back(step.loss);
    if (e == params.epochs) break;
    for (std::size_t c = 0; c < d; ++c) model.weights[c] -= params.learning_rate * step.grad_w[c];
    model.bias -= params.learning_rate * step.grad_b;
  }

  if (params.standardize) {
    // w.((h - mean) / scale) + b == (w / scale).h + (b - sum w mean / scale)
    for (std::size_t c = 0; c < d; ++c) {
      model.weights[c] /= scale[c];
      model.bias -= model.weights[c] * mean[c];
    }
  }
  return model;
}

Prediction logreg_predict(const LogRegModel& model, std::span<const double> h) {
  if (h.size() != model.weights.size()) {
    throw DimensionError("logreg_predict: embedding has length " + std::to_string(h.size()) +
                         ", model expects " + std::to_string(model.weights.size()));
  }
  const double p = sigmoid(dot(model.weights.data(), h) + model.bias);
  return {p >= 0.5 ? 1 : 0, p};
}

}  // namespace synthlabel
