#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "getad/autodiff.hpp"

namespace getad {

struct GradcheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose perturbation moves a piecewise op (ReLU, LeakyReLU,
  /// ELU) across a branch point; central differences are not valid there.
  std::size_t skipped = 0;
  std::string worst;  // "input[k] flat index i"
  bool passed = false;
};

using Composite = std::function<ad::Var(ad::Graph&, std::span<const ad::Var>)>;

/// Compares reverse-mode gradients of f against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps), evaluated in 64-bit. Non-scalar outputs
/// are contracted with a fixed random weighting first. The relative error of
/// a coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
/// Throws std::domain_error when a forward value is not finite.
GradcheckReport gradcheck(const Composite& f, std::vector<Tensor64> inputs, double eps = 1e-3,
                          double tol = 1e-4);

}  // namespace getad
