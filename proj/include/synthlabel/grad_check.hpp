#pragma once

#include <functional>

#include "synthlabel/autodiff.hpp"

namespace synthlabel {

/// Builds a scalar on `graph` from the point variable.
using ScalarGraphFn = std::function<ad::Var(ad::Graph& graph, ad::Var point)>;

/// Compares the reverse-mode gradient of `fn` at `point` with central
/// differences. Returns max_i |analytic_i - numeric_i| /
/// max(1, |analytic_i|, |numeric_i|). epsilon must lie in (0, 1e-2].
double grad_check(const ScalarGraphFn& fn, const Tensor& point, double epsilon = 1e-5);

/// Central-difference gradient alone, exposed for tests that need the
/// numeric side by itself.
Tensor numeric_gradient(const ScalarGraphFn& fn, const Tensor& point, double epsilon);

}  // namespace synthlabel
