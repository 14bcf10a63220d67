#pragma once

#include <string>

#include "foley/tensor.hpp"

namespace foley {

enum class LossKind { mse, mae, xent_bernoulli, xent_literal, xent_categorical };

// CLI spellings: mse, mae, xent, xent-literal, xent-cat.
std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

inline constexpr double kLossEpsilon = 1e-7;

// Scalar loss [1]. Continuous kinds need output.shape() == target.shape().
// xent_categorical takes logits [..., 256] against amplitude targets [...].
//
//   mse                mean (o - t)^2
//   mae                mean |o - t|
//   xent_bernoulli     p = (t+1)/2, q = clamp((o+1)/2, eps, 1-eps),
//                      mean -[p log q + (1-p) log(1-q)]
//   xent_literal mean -o * log(clamp((t+1)/2, eps, 1)); output plays P,
//                      so the value can be negative
//   xent_categorical   mean cross-entropy of the logits against quantize(t)
Tensor loss(LossKind kind, const Tensor& output, const Tensor& target);

}  // namespace foley
