#include "foley/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "foley/errors.hpp"
#include "foley/ops.hpp"
#include "foley/quantize.hpp"

namespace foley {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::mse:
      return "mse";
    case LossKind::mae:
      return "mae";
    case LossKind::xent_bernoulli:
      return "xent";
    case LossKind::xent_literal:
      return "xent-literal";
    case LossKind::xent_categorical:
      return "xent-cat";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "mse") return LossKind::mse;
  if (text == "mae") return LossKind::mae;
  if (text == "xent" || text == "xent_bernoulli") return LossKind::xent_bernoulli;
  if (text == "xent-literal" || text == "xent_literal") return LossKind::xent_literal;
  if (text == "xent-cat" || text == "xent_categorical") return LossKind::xent_categorical;
  throw ParameterError("unknown loss '" + text + "' (mse, mae, xent, xent-literal, xent-cat)");
}

namespace {

void check_amplitudes(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (!(v >= -1.0 && v <= 1.0)) {
      throw RangeError(std::string("loss: ") + what + " amplitude " + std::to_string(v) + " outside [-1, 1]");
    }
  }
}

Tensor constant_like(const Tensor& t, double (*fn)(double)) {
  std::vector<double> values(t.data().begin(), t.data().end());
  for (auto& v : values) v = fn(v);
  return Tensor::from(t.shape(), std::move(values));
}

}  // namespace

Tensor loss(LossKind kind, const Tensor& output, const Tensor& target) {
  if (kind == LossKind::xent_categorical) {
    if (output.rank() < 1 || output.shape().back() != kQuantBins) {
      throw ContractError("loss xent-cat: needs quantized logits [..., 256], got " + to_string(output.shape()));
    }
    Shape expected(output.shape().begin(), output.shape().end() - 1);
    if (target.shape() != expected) {
      throw DimensionError("loss xent-cat: target " + to_string(target.shape()) + " does not match logits " +
                           to_string(output.shape()));
    }
    std::vector<std::size_t> bins;
    bins.reserve(target.size());
    for (double v : target.data()) bins.push_back(quantize(v));
    return ops::cross_entropy_logits(ops::reshape(output, {target.size(), kQuantBins}), bins);
  }
  if (output.shape() != target.shape()) {
    if (output.rank() >= 1 && output.shape().back() == kQuantBins) {
      throw ContractError("loss " + to_string(kind) + ": quantized logits need the xent-cat loss");
    }
    throw DimensionError("loss " + to_string(kind) + ": output " + to_string(output.shape()) + " vs target " +
                         to_string(target.shape()));
  }
  switch (kind) {
    case LossKind::mse:
      return ops::mean(ops::square(ops::sub(output, target)));
    case LossKind::mae:
      return ops::mean(ops::abs(ops::sub(output, target)));
    case LossKind::xent_bernoulli: {
      check_amplitudes(target, "target");
      const Tensor p = constant_like(target, [](double t) { return (t + 1.0) / 2.0; });
      const Tensor not_p = constant_like(target, [](double t) { return 1.0 - (t + 1.0) / 2.0; });
      const Tensor q = ops::clamp(ops::affine(output, 0.5, 0.5), kLossEpsilon, 1.0 - kLossEpsilon);
      const Tensor terms = ops::add(ops::mul(p, ops::log(q)), ops::mul(not_p, ops::log(ops::affine(q, -1.0, 1.0))));
      return ops::scale(ops::mean(terms), -1.0);
    }
    case LossKind::xent_literal: {
      check_amplitudes(target, "target");
      const Tensor log_q =
          constant_like(target, [](double t) { return std::log(std::clamp((t + 1.0) / 2.0, kLossEpsilon, 1.0)); });
      return ops::scale(ops::mean(ops::mul(output, log_q)), -1.0);
    }
    case LossKind::xent_categorical:
      break;
  }
  throw ContractError("loss: unhandled kind");
}

}  // namespace foley
