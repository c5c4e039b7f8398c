#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "synthlabel/error.hpp"
#include "synthlabel/kernels.hpp"
#include "synthlabel/wrappers.hpp"

namespace synthlabel {

namespace {

constexpr double kTau = 1e-12;
constexpr double kPruneBelow = 1e-8;

}  // namespace

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("RBF gamma must be positive");
  return std::exp(-gamma * squared_distance(u, v));
}

double scale_gamma(const Tensor& embeddings) {
  if (embeddings.rank() != 2) throw DimensionError("scale_gamma expects an N x D matrix");
  const double n = static_cast<double>(embeddings.size());
  double mean = 0.0;
  for (double v : embeddings.data()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : embeddings.data()) var += (v - mean) * (v - mean);
  var /= n;
  const double d = static_cast<double>(embeddings.dim(1));
  return var > 0.0 ? 1.0 / (d * var) : 1.0 / d;
}

double svm_dual_objective(std::span<const double> alphas, std::span<const int> labels,
                          const Tensor& gram) {
  const std::size_t n = alphas.size();
  double linear = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    linear += alphas[i];
    if (alphas[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      quad += alphas[i] * alphas[j] * labels[i] * labels[j] * gram.at(i, j);
    }
  }
  return linear - 0.5 * quad;
}

SvmModel svm_train(const Tensor& embeddings, std::span<const int> labels, const SvmParams& params) {
  if (embeddings.rank() != 2) throw DimensionError("svm_train expects an N x D matrix");
  const std::size_t n = embeddings.dim(0);
  if (labels.size() != n) throw DimensionError("svm_train: label count does not match rows");
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1) has_pos = true;
    else if (y == -1) has_neg = true;
    else throw ParameterError("svm_train labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw ParameterError("svm_train needs at least one sample of each class");
  if (!(params.c > 0.0)) throw ParameterError("SVM C must be positive");
  if (!(params.tol > 0.0 && params.tol <= 0.1)) throw ParameterError("SVM tol must lie in (0, 0.1]");

  const double gamma = params.gamma > 0.0 ? params.gamma : scale_gamma(embeddings);
  const double c = params.c;
  const Tensor gram = kernels::rbf_gram(kernels::default_exec(), embeddings, gamma);
  auto q = [&](std::size_t i, std::size_t j) { return labels[i] * labels[j] * gram.at(i, j); };

  // Minimisation form: f(a) = 1/2 a^T Q a - e^T a, gradient G = Q a - e.
  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  auto in_up = [&](std::size_t t) {
    return (labels[t] == 1 && alpha[t] < c) || (labels[t] == -1 && alpha[t] > 0.0);
  };
  auto in_low = [&](std::size_t t) {
    return (labels[t] == 1 && alpha[t] > 0.0) || (labels[t] == -1 && alpha[t] < c);
  };

  const std::size_t max_iter = std::max<std::size_t>(params.max_passes * n, 100);
  std::size_t iter = 0;
  double violation = std::numeric_limits<double>::infinity();
  while (true) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -labels[t] * grad[t] >= gmax) {
        gmax = -labels[t] * grad[t];
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      gmax2 = std::max(gmax2, labels[t] * grad[t]);
      if (i == n) continue;
      const double b = gmax + labels[t] * grad[t];
      if (b > 0.0) {
        double a = gram.at(i, i) + gram.at(t, t) - 2.0 * gram.at(i, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj <= best) {
          best = obj;
          j = t;
        }
      }
    }
    violation = gmax + gmax2;
    if (violation < params.tol || i == n || j == n) break;
    if (iter >= max_iter) {
      throw ConvergenceError("SMO did not converge after " + std::to_string(iter) +
                                 " iterations; KKT violation " + std::to_string(violation),
                             violation);
    }
    ++iter;

    const double old_i = alpha[i], old_j = alpha[j];
    if (labels[i] != labels[j]) {
      double quad = gram.at(i, i) + gram.at(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = gram.at(i, i) + gram.at(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double total = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (total > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = total - c;
        }
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = total - c;
        }
      } else {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = total;
        }
        if (alpha[i] < 0.0) {
          alpha[i] = 0.0;
          alpha[j] = total;
        }
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double rho_sum = 0.0, ub = std::numeric_limits<double>::infinity(),
         lb = -std::numeric_limits<double>::infinity();
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = labels[t] * grad[t];
    if (alpha[t] > 0.0 && alpha[t] < c) {
      rho_sum += yg;
      ++free_count;
    } else if ((alpha[t] >= c && labels[t] == -1) || (alpha[t] <= 0.0 && labels[t] == 1)) {
      ub = std::min(ub, yg);
    } else {
      lb = std::max(lb, yg);
    }
  }
  const double rho = free_count > 0 ? rho_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);

  SvmModel model;
  model.gamma = gamma;
  model.c = c;
  model.bias = -rho;
  model.iterations = iter;
  model.dual_objective = svm_dual_objective(alpha, labels, gram);
  std::vector<std::size_t> keep;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > kPruneBelow) keep.push_back(t);
  }
  const std::size_t d = embeddings.dim(1);
  model.support_vectors = Tensor({std::max<std::size_t>(keep.size(), 1), d});
  for (std::size_t s = 0; s < keep.size(); ++s) {
    const auto src = embeddings.row(keep[s]);
    std::copy(src.begin(), src.end(), model.support_vectors.row(s).begin());
    model.alphas.push_back(alpha[keep[s]]);
    model.labels.push_back(labels[keep[s]]);
  }
  if (keep.empty()) throw ConvergenceError("SMO returned no support vectors", violation);
  return model;
}

Prediction svm_predict(const SvmModel& model, std::span<const double> h) {
  if (h.size() != model.support_vectors.dim(1)) {
    throw DimensionError("svm_predict: embedding has length " + std::to_string(h.size()) +
                         ", model expects " + std::to_string(model.support_vectors.dim(1)));
  }
  double score = model.bias;
  for (std::size_t s = 0; s < model.alphas.size(); ++s) {
    score += model.alphas[s] * model.labels[s] *
             std::exp(-model.gamma * squared_distance(model.support_vectors.row(s), h));
  }
  return {score >= 0.0 ? 1 : -1, score};
}

}  // namespace synthlabel
