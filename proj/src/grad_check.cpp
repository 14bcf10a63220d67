#include "foley/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "foley/errors.hpp"
#include "foley/ops.hpp"
#include "foley/parameters.hpp"

namespace foley {

namespace {

double contract(const Tensor& out, const std::vector<double>& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) total += out[i] * weights[i];
  return total;
}

}  // namespace

GradCheckResult grad_check_leaves(const std::function<Tensor()>& fn, const std::vector<Tensor>& leaves,
                                  double eps) {
  if (!(eps > 0.0)) throw ParameterError("grad_check: eps must be positive");
  for (const auto& leaf : leaves) {
    if (!leaf.is_leaf() || !leaf.requires_grad()) throw ContractError("grad_check: inputs must be leaves requiring grad");
  }

  Tensor out = fn();
  std::vector<double> weights(out.size(), 1.0);
  if (out.size() > 1) {
    Rng rng(0x5eedULL);
    for (auto& w : weights) w = rng.uniform(0.5, 1.5);
  }

  GradCheckResult result;
  if (!out.requires_grad()) {
    // Constant function: every analytic and numeric derivative is zero.
    return result;
  }
  for (auto leaf : leaves) leaf.zero_grad();
  const Tensor weight_tensor = Tensor::from(out.shape(), weights);
  backward(ops::sum(ops::mul(out, weight_tensor)));

  std::vector<std::vector<double>> analytic;
  for (const auto& leaf : leaves) analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());

  NoGradGuard no_grad;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Tensor leaf = leaves[k];
    auto data = leaf.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double plus = contract(fn(), weights);
      data[i] = saved - eps;
      const double minus = contract(fn(), weights);
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (err > result.max_relative_error) {
        result = {err, k, i, a, numeric};
      }
    }
  }
  return result;
}

GradCheckResult grad_check_detailed(const TensorFn& fn, const std::vector<Tensor>& inputs, double eps) {
  // Fresh leaves so the caller's tensors are never mutated.
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(Tensor::from(t.shape(), {t.data().begin(), t.data().end()}, true));
  return grad_check_leaves([&] { return fn(leaves); }, leaves, eps);
}

double grad_check(const TensorFn& fn, const std::vector<Tensor>& inputs, double eps) {
  return grad_check_detailed(fn, inputs, eps).max_relative_error;
}

}  // namespace foley
