#include "synthlabel/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "synthlabel/error.hpp"

namespace synthlabel {

namespace {

double evaluate(const ScalarGraphFn& fn, const Tensor& point) {
  ad::Graph g;
  const auto x = g.constant(point);
  const auto y = fn(g, x);
  const Tensor& v = g.value(y);
  if (v.size() != 1) throw DimensionError("grad_check function must return a scalar");
  if (!std::isfinite(v[0])) throw NumericError("grad_check: function value is not finite");
  return v[0];
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) {
    throw ParameterError("grad_check epsilon must lie in (0, 1e-2]");
  }
}

}  // namespace

Tensor numeric_gradient(const ScalarGraphFn& fn, const Tensor& point, double epsilon) {
  check_epsilon(epsilon);
  Tensor grad(point.shape());
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + epsilon;
    const double hi = evaluate(fn, probe);
    probe[i] = orig - epsilon;
    const double lo = evaluate(fn, probe);
    probe[i] = orig;
    grad[i] = (hi - lo) / (2.0 * epsilon);
  }
  return grad;
}

double grad_check(const ScalarGraphFn& fn, const Tensor& point, double epsilon) {
  check_epsilon(epsilon);
  ad::Graph g;
  const auto x = g.parameter_owned(point);
  const auto y = fn(g, x);
  if (g.value(y).size() != 1) throw DimensionError("grad_check function must return a scalar");
  if (!std::isfinite(g.value(y)[0])) throw NumericError("grad_check: function value is not finite");
  g.backward(y);
  const Tensor analytic = g.grad(x);
  const Tensor numeric = numeric_gradient(fn, point, epsilon);
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double scale = std::max({1.0, std::abs(a), std::abs(n)});
    worst = std::max(worst, std::abs(a - n) / scale);
  }
  return worst;
}

}  // namespace synthlabel
