#pragma once

// Define-by-run reverse-mode differentiation. A Graph is a tape of nodes in
// creation order, which is a topological order; backward walks it in reverse
// once. A Graph is confined to a single thread.

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "synthlabel/tensor.hpp"

namespace synthlabel::ad {

struct Var {
  std::size_t id = 0;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Leaf without gradient.
  Var constant(Tensor value);
  /// Leaf without gradient that references `value`, which must outlive the
  /// graph.
  Var constant_ref(const Tensor& value);
  /// Leaf that receives a gradient. The referenced tensor is not copied and
  /// must outlive the graph.
  Var parameter(const Tensor& value);
  /// Leaf that receives a gradient and owns its value.
  Var parameter_owned(Tensor value);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient of the last backward root w.r.t. v; zeros if v did not
  /// contribute.
  const Tensor& grad(Var v) const;

  /// Reverse sweep seeded with 1 at a scalar root. Gradients from any
  /// previous sweep are discarded first, so sweeping twice gives the same
  /// result.
  void backward(Var root);
  /// Reverse sweep seeded with `seed` (same shape as the root).
  void backward(Var root, const Tensor& seed);

  std::size_t node_count() const { return nodes_.size(); }

  // Op-author interface.
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn fn);
  const std::vector<Var>& inputs_of(std::size_t node) const { return nodes_[node].inputs; }
  const Tensor& value_of(std::size_t node) const;
  const Tensor& out_grad(std::size_t node) const { return nodes_[node].grad; }
  /// Accumulation buffer for v, allocated as zeros on first use.
  Tensor& grad_accumulator(Var v);

 private:
  struct Node {
    std::string_view op;
    Tensor owned;
    const Tensor* external = nullptr;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    Tensor grad;
    bool grad_allocated = false;
  };

  std::vector<Node> nodes_;
  mutable Tensor empty_grad_;
};

Var matmul(Graph& g, Var a, Var b);
/// Valid cross-correlation, input CxHxW, kernels KxCxkhxkw.
Var conv2d(Graph& g, Var input, Var kernels, std::size_t stride);
/// Adds bias[K] along the leading axis of KxHxW, or along the last axis of
/// BxN / N.
Var add_bias(Graph& g, Var x, Var bias);
Var relu(Graph& g, Var x);
/// Non-overlapping window pooling of CxHxW; trailing rows/cols that do not
/// fill a window are dropped. Ties route to the first maximum.
Var max_pool2d(Graph& g, Var x, std::size_t window);
/// Mean of all elements, as a {1} tensor.
Var mean_reduce(Graph& g, Var x);
Var sum(Graph& g, Var x);
/// Per-channel (x - mean) / sqrt(var + eps) of a CxHxW tensor, with the
/// population variance over each channel plane.
Var standardize_channels(Graph& g, Var x, double eps = 1e-4);
/// Elementwise product of equal-shaped tensors.
Var mul(Graph& g, Var a, Var b);
Var reshape(Graph& g, Var x, Shape shape);
/// Mean over rows of -log softmax(logits[b])[labels[b]]; logits are BxC.
Var softmax_cross_entropy(Graph& g, Var logits, std::span<const std::size_t> labels);

}  // namespace synthlabel::ad
