#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "synthlabel/error.hpp"
#include "synthlabel/wrappers.hpp"

namespace synthlabel {

KnnModel knn_fit(const Tensor& embeddings, std::span<const int> labels, std::size_t k) {
  if (embeddings.rank() != 2) throw DimensionError("knn_fit expects an N x D matrix");
  if (labels.size() != embeddings.dim(0)) throw DimensionError("knn_fit: label count does not match rows");
  if (k == 0 || k % 2 == 0) throw ParameterError("kNN k must be a positive odd integer");
  if (k > labels.size()) {
    throw ParameterError("kNN k = " + std::to_string(k) + " exceeds the " +
                         std::to_string(labels.size()) + " labeled points");
  }
  return KnnModel{embeddings, std::vector<int>(labels.begin(), labels.end()), k};
}

Prediction knn_predict(const KnnModel& model, std::span<const double> h) {
  if (h.size() != model.points.dim(1)) {
    throw DimensionError("knn_predict: embedding has length " + std::to_string(h.size()) +
                         ", model expects " + std::to_string(model.points.dim(1)));
  }
  const std::size_t m = model.points.dim(0);
  std::vector<std::pair<double, std::size_t>> dist(m);
  for (std::size_t i = 0; i < m; ++i) dist[i] = {squared_distance(model.points.row(i), h), i};
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(model.k), dist.end());
  std::map<int, std::size_t> votes;
  for (std::size_t i = 0; i < model.k; ++i) ++votes[model.labels[dist[i].second]];
  // Highest count wins; on a tie the smaller class id (map order) wins.
  int label = votes.begin()->first;
  std::size_t best = 0;
  for (const auto& [cls, count] : votes) {
    if (count > best) {
      best = count;
      label = cls;
    }
  }
  const auto ones = votes.count(1) ? votes.at(1) : 0;
  return {label, static_cast<double>(ones) / static_cast<double>(model.k)};
}

}  // namespace synthlabel
