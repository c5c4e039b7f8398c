#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace synthlabel {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Finite-difference checks of every differentiable op, the NT-Xent loss
/// (N = 4, dim 8, tau = 0.5) and a small end-to-end encoder, each against
/// `tolerance` on max relative error.
std::vector<GradCheckResult> run_grad_checks(double tolerance = 1e-4, std::uint64_t seed = 1);

}  // namespace synthlabel
