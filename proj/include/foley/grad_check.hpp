#pragma once

#include <functional>
#include <vector>

#include "foley/tensor.hpp"

namespace foley {

using TensorFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of `fn` against central finite differences
// (f(x+eps) - f(x-eps)) / (2 eps) for every coordinate of every input.
// Non-scalar outputs are contracted with fixed pseudo-random weights so the
// whole Jacobian is probed. Per-coordinate error is |a-n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check_detailed(const TensorFn& fn, const std::vector<Tensor>& inputs, double eps = 1e-5);

double grad_check(const TensorFn& fn, const std::vector<Tensor>& inputs, double eps = 1e-5);

// Same check against leaves the closure already captures (model parameters).
// Each leaf is perturbed in place and restored.
GradCheckResult grad_check_leaves(const std::function<Tensor()>& fn, const std::vector<Tensor>& leaves,
                                  double eps = 1e-5);

}  // namespace foley
