#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "foley/tensor.hpp"

// Differentiable operations. No implicit broadcasting: operands of
// elementwise ops must share a shape, and only bias vectors are broadcast.
namespace foley::ops {

// Elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// a * factor + offset
Tensor affine(const Tensor& a, double factor, double offset);
// Multiplies every element by a learned one-element tensor.
Tensor scale_by(const Tensor& a, const Tensor& gate);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor log(const Tensor& a);
// Gradient passes where lo <= x <= hi, zero elsewhere.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor tanh(const Tensor& a);
// Subgradient at exactly 0 is 0.
Tensor relu(const Tensor& a);
Tensor softmax_lastdim(const Tensor& a);

enum class Activation { tanh, relu, softmax_lastdim };
Tensor activation(const Tensor& a, Activation kind);

// Softmax over the last axis of a [Tq, Tk] score matrix where query row i sits
// at absolute position query_offset + i and may only see keys j <= that position.
// Masked entries are exactly zero and receive no gradient.
Tensor causal_softmax(const Tensor& scores, std::size_t query_offset);

// Reductions
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Mean over one axis; the axis is removed from the shape.
Tensor mean_axis(const Tensor& a, std::size_t axis);

// Shape manipulation
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);  // rank 2 only
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Expands an axis of extent 1 to `times` copies.
Tensor repeat_axis(const Tensor& a, std::size_t axis, std::size_t times);

// Dense layers
Tensor matmul(const Tensor& a, const Tensor& b);
// y = xW + b over the last axis of x; `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
};

// x: [ch_in, T], kernel: [ch_out, ch_in, K], bias: [ch_out] or undefined.
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, const Conv1dOptions& options);

// Output at t reads x[t - dilation*k] for k in [0, K); the left side is zero-padded
// so the output keeps length T.
Tensor conv1d_causal(const Tensor& x, const Tensor& kernel, long dilation, const Tensor& bias = {});

using Triple = std::array<std::size_t, 3>;

// x: [ch_in, T, H, W], kernel: [ch_out, ch_in, kT, kH, kW]. Cross-correlation.
Tensor conv3d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Triple stride, Triple padding);

// Per-position channel mixing. x: [ch_in, ...], kernel: [ch_out, ch_in].
Tensor conv1x1_channels(const Tensor& x, const Tensor& kernel, const Tensor& bias = {});

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // weights [d_model, d_model], biases [d_model]
  std::size_t heads = 1;
};

// x: [T, d_model]. Scaled dot-product attention with 1/sqrt(d_model/heads)
// pre-softmax scaling. With last_query_only the result is [1, d_model] and
// equals the final row of the full computation.
Tensor multi_head_attention(const Tensor& x, const AttentionParams& params, bool causal_mask,
                            bool last_query_only = false, std::vector<Tensor>* weights_out = nullptr);

// Mean over rows of -log softmax(logits)[target]; logits: [R, C].
Tensor cross_entropy_logits(const Tensor& logits, const std::vector<std::size_t>& targets);

}  // namespace foley::ops
