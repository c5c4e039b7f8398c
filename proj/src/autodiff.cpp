#include "synthlabel/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "synthlabel/error.hpp"
#include "synthlabel/kernels.hpp"

namespace synthlabel::ad {

Var Graph::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::constant_ref(const Tensor& value) {
  Node n;
  n.op = "constant";
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::parameter(const Tensor& value) {
  Node n;
  n.op = "parameter";
  n.external = &value;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::parameter_owned(Tensor value) {
  Node n;
  n.op = "parameter";
  n.owned = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tensor& Graph::value_of(std::size_t node) const {
  const Node& n = nodes_[node];
  return n.external ? *n.external : n.owned;
}

const Tensor& Graph::value(Var v) const {
  if (v.id >= nodes_.size()) throw DimensionError("variable does not belong to this graph");
  return value_of(v.id);
}

bool Graph::requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad_allocated) return n.grad;
  empty_grad_ = Tensor(value_of(v.id).shape(), 0.0);
  return empty_grad_;
}

Tensor& Graph::grad_accumulator(Var v) {
  Node& n = nodes_[v.id];
  if (!n.grad_allocated) {
    n.grad = Tensor(value_of(v.id).shape(), 0.0);
    n.grad_allocated = true;
  }
  return n.grad;
}

Var Graph::record(std::string_view op, Tensor value, std::span<const Var> inputs,
                  BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + " produced a non-finite value");
  }
  Node n;
  n.op = op;
  n.owned = std::move(value);
  n.inputs.assign(inputs.begin(), inputs.end());
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [&](Var in) { return nodes_.at(in.id).requires_grad; });
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Graph::backward(Var root) {
  if (value(root).size() != 1) {
    throw DimensionError("backward without a seed needs a scalar root, got " +
                         shape_str(value(root).shape()));
  }
  backward(root, Tensor(value(root).shape(), 1.0));
}

void Graph::backward(Var root, const Tensor& seed) {
  require_same_shape(value(root), seed, "backward seed");
  for (auto& n : nodes_) {
    n.grad_allocated = false;
    n.grad = Tensor();
  }
  if (!nodes_[root.id].requires_grad) return;
  grad_accumulator(root) = seed;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.grad_allocated || !n.backward) continue;
    n.backward(*this, i);
  }
}

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + " expects rank " + std::to_string(rank) +
                         ", got " + shape_str(t.shape()));
  }
}

}  // namespace

Var matmul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  kernels::matmul(kernels::default_exec(), m, k, n, av.data(), bv.data(), out.data());
  const Var ins[] = {a, b};
  return g.record("matmul", std::move(out), ins, [m, k, n](Graph& g, std::size_t self) {
    const Var a = g.inputs_of(self)[0], b = g.inputs_of(self)[1];
    const Tensor& dc = g.out_grad(self);
    const auto exec = kernels::default_exec();
    if (g.requires_grad(a)) {
      kernels::matmul_grad_a(exec, m, k, n, dc.data(), g.value(b).data(),
                             g.grad_accumulator(a).data());
    }
    if (g.requires_grad(b)) {
      kernels::matmul_grad_b(exec, m, k, n, g.value(a).data(), dc.data(),
                             g.grad_accumulator(b).data());
    }
  });
}

Var conv2d(Graph& g, Var input, Var kernels_var, std::size_t stride) {
  const Tensor& in = g.value(input);
  const Tensor& w = g.value(kernels_var);
  const auto geom = kernels::conv_geometry(in.shape(), w.shape(), stride);
  Tensor out({geom.kernels, geom.out_h, geom.out_w});
  kernels::conv2d_forward(kernels::default_exec(), geom, in.data(), w.data(), out.data());
  const Var ins[] = {input, kernels_var};
  return g.record("conv2d", std::move(out), ins, [geom](Graph& g, std::size_t self) {
    const Var in = g.inputs_of(self)[0], w = g.inputs_of(self)[1];
    const Tensor& dout = g.out_grad(self);
    const auto exec = kernels::default_exec();
    if (g.requires_grad(in)) {
      kernels::conv2d_backward_input(exec, geom, dout.data(), g.value(w).data(),
                                     g.grad_accumulator(in).data());
    }
    if (g.requires_grad(w)) {
      kernels::conv2d_backward_kernel(exec, geom, dout.data(), g.value(in).data(),
                                      g.grad_accumulator(w).data());
    }
  });
}

Var add_bias(Graph& g, Var x, Var bias) {
  const Tensor& xv = g.value(x);
  const Tensor& bv = g.value(bias);
  if (bv.rank() != 1) throw DimensionError("add_bias expects a vector bias, got " + shape_str(bv.shape()));
  const std::size_t nb = bv.size();
  // Either KxHxW with bias over K (block layout) or ...xN with bias over N.
  std::size_t block = 0;
  bool leading = false;
  if (xv.rank() == 3 && xv.dim(0) == nb) {
    leading = true;
    block = xv.dim(1) * xv.dim(2);
  } else if ((xv.rank() == 1 || xv.rank() == 2) && xv.shape().back() == nb) {
    block = xv.size() / nb;
  } else {
    throw DimensionError("add_bias shape mismatch: " + shape_str(xv.shape()) + " + " +
                         shape_str(bv.shape()));
  }
  Tensor out = xv;
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] += leading ? bv[i / block] : bv[i % nb];
  }
  const Var ins[] = {x, bias};
  return g.record("add_bias", std::move(out), ins,
                  [leading, block, nb](Graph& g, std::size_t self) {
                    const Var x = g.inputs_of(self)[0], b = g.inputs_of(self)[1];
                    const Tensor& d = g.out_grad(self);
                    if (g.requires_grad(x)) {
                      auto dx = g.grad_accumulator(x).data();
                      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d[i];
                    }
                    if (g.requires_grad(b)) {
                      auto db = g.grad_accumulator(b).data();
                      for (std::size_t i = 0; i < d.size(); ++i) {
                        db[leading ? i / block : i % nb] += d[i];
                      }
                    }
                  });
}

Var relu(Graph& g, Var x) {
  Tensor out = g.value(x);
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  const Var ins[] = {x};
  return g.record("relu", std::move(out), ins, [](Graph& g, std::size_t self) {
    const Var x = g.inputs_of(self)[0];
    const Tensor& xv = g.value(x);
    const Tensor& d = g.out_grad(self);
    auto dx = g.grad_accumulator(x).data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (xv[i] > 0.0) dx[i] += d[i];
    }
  });
}

Var max_pool2d(Graph& g, Var x, std::size_t window) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 3, "max_pool2d");
  if (window == 0) throw ParameterError("max_pool2d window must be positive");
  const std::size_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (window > h || window > w) {
    throw DimensionError("max_pool2d window " + std::to_string(window) + " larger than input " +
                         shape_str(xv.shape()));
  }
  const std::size_t oh = h / window, ow = w / window;
  Tensor out({c, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo) {
        std::size_t best = (ch * h + y * window) * w + xo * window;
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = (ch * h + y * window + i) * w + xo * window + j;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (ch * oh + y) * ow + xo;
        out[o] = xv[best];
        argmax[o] = best;
      }
    }
  }
  const Var ins[] = {x};
  return g.record("max_pool2d", std::move(out), ins,
                  [argmax = std::move(argmax)](Graph& g, std::size_t self) {
                    const Var x = g.inputs_of(self)[0];
                    const Tensor& d = g.out_grad(self);
                    auto dx = g.grad_accumulator(x).data();
                    for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += d[o];
                  });
}

Var sum(Graph& g, Var x) {
  double s = 0.0;
  for (double v : g.value(x).data()) s += v;
  const Var ins[] = {x};
  return g.record("sum", Tensor::scalar(s), ins, [](Graph& g, std::size_t self) {
    const Var x = g.inputs_of(self)[0];
    const double d = g.out_grad(self)[0];
    for (auto& v : g.grad_accumulator(x).data()) v += d;
  });
}

Var mean_reduce(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += v;
  const double n = static_cast<double>(xv.size());
  const Var ins[] = {x};
  return g.record("mean_reduce", Tensor::scalar(s / n), ins, [n](Graph& g, std::size_t self) {
    const Var x = g.inputs_of(self)[0];
    const double d = g.out_grad(self)[0] / n;
    for (auto& v : g.grad_accumulator(x).data()) v += d;
  });
}

Var standardize_channels(Graph& g, Var x, double eps) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 3, "standardize_channels");
  if (!(eps > 0.0)) throw ParameterError("standardize_channels eps must be positive");
  const std::size_t c = xv.dim(0), plane = xv.dim(1) * xv.dim(2);
  Tensor out = xv;
  std::vector<double> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    auto p = out.data().subspan(ch * plane, plane);
    double m = 0.0;
    for (double v : p) m += v;
    m /= static_cast<double>(plane);
    double var = 0.0;
    for (double v : p) var += (v - m) * (v - m);
    var /= static_cast<double>(plane);
    inv_std[ch] = 1.0 / std::sqrt(var + eps);
    for (auto& v : p) v = (v - m) * inv_std[ch];
  }
  const Var ins[] = {x};
  return g.record("standardize_channels", std::move(out), ins,
                  [c, plane, inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
    const Var x = g.inputs_of(self)[0];
    const Tensor& y = g.value_of(self);
    const Tensor& d = g.out_grad(self);
    auto dx = g.grad_accumulator(x).data();
    const double n = static_cast<double>(plane);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t o = ch * plane;
      double md = 0.0, mdy = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        md += d[o + i];
        mdy += d[o + i] * y[o + i];
      }
      md /= n;
      mdy /= n;
      for (std::size_t i = 0; i < plane; ++i) {
        dx[o + i] += inv_std[ch] * (d[o + i] - md - y[o + i] * mdy);
      }
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const Var ins[] = {a, b};
  return g.record("mul", std::move(out), ins, [](Graph& g, std::size_t self) {
    const Var a = g.inputs_of(self)[0], b = g.inputs_of(self)[1];
    const Tensor& d = g.out_grad(self);
    // Snapshot values: a and b may be the same node.
    const Tensor av = g.value(a), bv = g.value(b);
    if (g.requires_grad(a)) {
      auto da = g.grad_accumulator(a).data();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += d[i] * bv[i];
    }
    if (g.requires_grad(b)) {
      auto db = g.grad_accumulator(b).data();
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += d[i] * av[i];
    }
  });
}

Var reshape(Graph& g, Var x, Shape shape) {
  Tensor out = g.value(x).reshaped(std::move(shape));
  const Var ins[] = {x};
  return g.record("reshape", std::move(out), ins, [](Graph& g, std::size_t self) {
    const Var x = g.inputs_of(self)[0];
    const Tensor& d = g.out_grad(self);
    auto dx = g.grad_accumulator(x).data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d[i];
  });
}

Var softmax_cross_entropy(Graph& g, Var logits, std::span<const std::size_t> labels) {
  const Tensor& lv = g.value(logits);
  require_rank(lv, 2, "softmax_cross_entropy");
  const std::size_t b = lv.dim(0), c = lv.dim(1);
  if (labels.size() != b) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(b) + " rows");
  }
  Tensor probs({b, c});
  double loss = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] >= c) {
      throw ParameterError("class index " + std::to_string(labels[r]) + " out of range for " +
                           std::to_string(c) + " classes");
    }
    const auto row = lv.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) probs.at(r, j) = std::exp(row[j] - log_z);
    loss += log_z - row[labels[r]];
  }
  loss /= static_cast<double>(b);
  std::vector<std::size_t> label_copy(labels.begin(), labels.end());
  const Var ins[] = {logits};
  return g.record("softmax_cross_entropy", Tensor::scalar(loss), ins,
                  [probs = std::move(probs), label_copy = std::move(label_copy), b, c](
                      Graph& g, std::size_t self) {
                    const Var l = g.inputs_of(self)[0];
                    const double d = g.out_grad(self)[0] / static_cast<double>(b);
                    Tensor& dl = g.grad_accumulator(l);
                    for (std::size_t r = 0; r < b; ++r) {
                      for (std::size_t j = 0; j < c; ++j) {
                        const double target = j == label_copy[r] ? 1.0 : 0.0;
                        dl.at(r, j) += d * (probs.at(r, j) - target);
                      }
                    }
                  });
}

}  // namespace synthlabel::ad
