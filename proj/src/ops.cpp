#include "foley/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "foley/errors.hpp"

namespace foley::ops {

namespace {

// Gradient buffer of input i, or nullptr when that input is off the tape.
std::vector<double>* input_grad(Node& self, std::size_t i) {
  auto& in = self.inputs[i];
  if (!in || !in->requires_grad) return nullptr;
  return &in->grad;
}

const std::vector<double>& input_data(const Node& self, std::size_t i) { return self.inputs[i]->data; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         to_string(a.shape()));
  }
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.size());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  return make_result(a.shape(), std::move(out), {a}, op, [deriv](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    const auto& x = input_data(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * deriv(x[i], self.data[i]);
  });
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_axis(const Tensor& a, std::size_t axis, const char* op) {
  if (axis >= a.rank()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(a.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), {a, b}, "add", [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), {a, b}, "sub", [](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), {a, b}, "mul", [](Node& self) {
    const auto& x = input_data(self, 0);
    const auto& y = input_data(self, 1);
    if (auto* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * y[i];
    }
    if (auto* g = input_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) { return affine(a, factor, 0.0); }

Tensor affine(const Tensor& a, double factor, double offset) {
  return unary(
      a, "affine", [=](double x) { return x * factor + offset; }, [=](double, double) { return factor; });
}

Tensor scale_by(const Tensor& a, const Tensor& gate) {
  if (gate.size() != 1) throw DimensionError("scale_by: gate must hold one value, got " + to_string(gate.shape()));
  const double s = gate[0];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  return make_result(a.shape(), std::move(out), {a, gate}, "scale_by", [](Node& self) {
    const auto& x = input_data(self, 0);
    const double s = input_data(self, 1)[0];
    if (auto* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * s;
    }
    if (auto* g = input_grad(self, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * x[i];
      (*g)[0] += acc;
    }
  });
}

Tensor square(const Tensor& a) {
  return unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& a) {
  return unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, "clamp", [=](double x) { return std::clamp(x, lo, hi); },
      [=](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax_lastdim(const Tensor& a) {
  if (a.rank() == 0) throw DimensionError("softmax_lastdim on rank-0 tensor");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.size() / cols;
  std::vector<double> out(a.size());
  const auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = out.data() + r * cols;
    const double m = *std::max_element(xr, xr + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (yr[c] = std::exp(xr[c] - m));
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= total;
  }
  return make_result(a.shape(), std::move(out), {a}, "softmax", [cols](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    const std::size_t rows = self.data.size() / cols;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * cols;
      const double* dy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy[c] * y[c];
      for (std::size_t c = 0; c < cols; ++c) (*g)[r * cols + c] += y[c] * (dy[c] - dot);
    }
  });
}

Tensor activation(const Tensor& a, Activation kind) {
  switch (kind) {
    case Activation::tanh:
      return tanh(a);
    case Activation::relu:
      return relu(a);
    case Activation::softmax_lastdim:
      return softmax_lastdim(a);
  }
  throw ParameterError("unknown activation");
}

Tensor causal_softmax(const Tensor& scores, std::size_t query_offset) {
  require_rank(scores, 2, "causal_softmax");
  const std::size_t rows = scores.dim(0);
  const std::size_t cols = scores.dim(1);
  if (query_offset + rows > cols) {
    throw DimensionError("causal_softmax: query positions exceed key count for shape " + to_string(scores.shape()));
  }
  std::vector<double> out(scores.size(), 0.0);
  const auto x = scores.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t visible = query_offset + r + 1;
    const double* xr = x.data() + r * cols;
    double* yr = out.data() + r * cols;
    const double m = *std::max_element(xr, xr + visible);
    double total = 0.0;
    for (std::size_t c = 0; c < visible; ++c) total += (yr[c] = std::exp(xr[c] - m));
    for (std::size_t c = 0; c < visible; ++c) yr[c] /= total;
  }
  return make_result(scores.shape(), std::move(out), {scores}, "causal_softmax", [cols, query_offset](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    const std::size_t rows = self.data.size() / cols;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t visible = query_offset + r + 1;
      const double* y = self.data.data() + r * cols;
      const double* dy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < visible; ++c) dot += dy[c] * y[c];
      for (std::size_t c = 0; c < visible; ++c) (*g)[r * cols + c] += y[c] * (dy[c] - dot);
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result({1}, {total}, {a}, "sum", [](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      for (auto& v : *g) v += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor mean_axis(const Tensor& a, std::size_t axis) {
  require_axis(a, axis, "mean_axis");
  const auto s = split_axis(a.shape(), axis);
  Shape shape = a.shape();
  shape.erase(shape.begin() + static_cast<long>(axis));
  if (shape.empty()) shape = {1};
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto x = a.data();
  const double inv = 1.0 / static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = x.data() + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  for (auto& v : out) v *= inv;
  return make_result(std::move(shape), std::move(out), {a}, "mean_axis", [s, inv](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t e = 0; e < s.extent; ++e) {
        double* dst = g->data() + (o * s.extent + e) * s.inner;
        const double* src = self.grad.data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * inv;
      }
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, "reshape", [](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.size());
  const auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = x[r * cols + c];
  return make_result({cols, rows}, std::move(out), {a}, "transpose", [rows, cols](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) (*g)[r * cols + c] += self.grad[c * rows + r];
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require_axis(a, axis, "slice");
  if (begin >= end || end > a.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of " + to_string(a.shape()));
  }
  const auto s = split_axis(a.shape(), axis);
  const std::size_t width = end - begin;
  Shape shape = a.shape();
  shape[axis] = width;
  std::vector<double> out(s.outer * width * s.inner);
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data() + (o * s.extent + begin) * s.inner, width * s.inner, out.data() + o * width * s.inner);
  }
  return make_result(std::move(shape), std::move(out), {a}, "slice", [s, begin, width](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = g->data() + (o * s.extent + begin) * s.inner;
      const double* src = self.grad.data() + o * width * s.inner;
      for (std::size_t i = 0; i < width * s.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  require_axis(parts[0], axis, "concat");
  Shape shape = parts[0].shape();
  std::size_t total = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != shape.size()) throw DimensionError("concat: rank mismatch " + to_string(probe));
    probe[axis] = shape[axis];
    if (probe != shape) {
      throw DimensionError("concat: shape " + to_string(p.shape()) + " incompatible with " + to_string(shape));
    }
    extents.push_back(p.dim(axis));
    total += p.dim(axis);
  }
  shape[axis] = total;
  const auto s = split_axis(shape, axis);
  std::vector<double> out(numel(shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto x = parts[k].data();
    const std::size_t w = extents[k];
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(x.data() + o * w * s.inner, w * s.inner, out.data() + (o * total + offset) * s.inner);
    }
    offset += w;
  }
  return make_result(std::move(shape), std::move(out), parts, "concat", [s, extents, total](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < extents.size(); ++k) {
      const std::size_t w = extents[k];
      if (auto* g = input_grad(self, k)) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = self.grad.data() + (o * total + offset) * s.inner;
          double* dst = g->data() + o * w * s.inner;
          for (std::size_t i = 0; i < w * s.inner; ++i) dst[i] += src[i];
        }
      }
      offset += w;
    }
  });
}

Tensor repeat_axis(const Tensor& a, std::size_t axis, std::size_t times) {
  require_axis(a, axis, "repeat_axis");
  if (a.dim(axis) != 1 || times == 0) {
    throw DimensionError("repeat_axis: axis " + std::to_string(axis) + " of " + to_string(a.shape()) +
                         " must have extent 1 and times must be positive");
  }
  const auto s = split_axis(a.shape(), axis);
  Shape shape = a.shape();
  shape[axis] = times;
  std::vector<double> out(s.outer * times * s.inner);
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t t = 0; t < times; ++t)
      std::copy_n(x.data() + o * s.inner, s.inner, out.data() + (o * times + t) * s.inner);
  return make_result(std::move(shape), std::move(out), {a}, "repeat_axis", [s, times](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t t = 0; t < times; ++t) {
        const double* src = self.grad.data() + (o * times + t) * s.inner;
        double* dst = g->data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
  });
}

namespace {

// c[m,n] += a[m,k] * b[k,n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m,k] += g[m,n] * b[k,n]^T
void gemm_acc_bt(const double* g, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      c[i * k + p] += acc;
    }
  }
}

// c[k,n] += a[m,k]^T * g[m,n]
void gemm_acc_at(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node& self) {
    if (auto* g = input_grad(self, 0)) gemm_acc_bt(self.grad.data(), input_data(self, 1).data(), g->data(), m, k, n);
    if (auto* g = input_grad(self, 1)) gemm_acc_at(input_data(self, 0).data(), self.grad.data(), g->data(), m, k, n);
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "linear");
  if (x.rank() == 0 || x.shape().back() != weight.dim(0)) {
    throw DimensionError("linear: input " + to_string(x.shape()) + " does not match weight " +
                         to_string(weight.shape()));
  }
  const std::size_t in = weight.dim(0), out_dim = weight.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    throw DimensionError("linear: bias " + to_string(bias.shape()) + " does not match weight " +
                         to_string(weight.shape()));
  }
  const std::size_t rows = x.size() / in;
  std::vector<double> out(rows * out_dim, 0.0);
  if (bias.defined()) {
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(bias.data().data(), out_dim, out.data() + r * out_dim);
  }
  gemm_acc(x.data().data(), weight.data().data(), out.data(), rows, in, out_dim);
  Shape shape = x.shape();
  shape.back() = out_dim;
  return make_result(std::move(shape), std::move(out), {x, weight, bias}, "linear", [rows, in, out_dim](Node& self) {
    if (auto* g = input_grad(self, 0))
      gemm_acc_bt(self.grad.data(), input_data(self, 1).data(), g->data(), rows, in, out_dim);
    if (auto* g = input_grad(self, 1))
      gemm_acc_at(input_data(self, 0).data(), self.grad.data(), g->data(), rows, in, out_dim);
    if (auto* g = input_grad(self, 2)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < out_dim; ++j) (*g)[j] += self.grad[r * out_dim + j];
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, const Conv1dOptions& opt) {
  require_rank(x, 2, "conv1d");
  require_rank(kernel, 3, "conv1d");
  if (opt.stride == 0 || opt.dilation == 0) throw ParameterError("conv1d: stride and dilation must be positive");
  const std::size_t cin = x.dim(0), length = x.dim(1);
  const std::size_t cout = kernel.dim(0), ksize = kernel.dim(2);
  if (kernel.dim(1) != cin) {
    throw DimensionError("conv1d: input " + to_string(x.shape()) + " does not match kernel " +
                         to_string(kernel.shape()));
  }
  if (bias.defined() && bias.size() != cout) {
    throw DimensionError("conv1d: bias " + to_string(bias.shape()) + " does not match kernel " +
                         to_string(kernel.shape()));
  }
  const std::size_t padded = length + opt.pad_left + opt.pad_right;
  const std::size_t span = opt.dilation * (ksize - 1) + 1;
  if (ksize == 0 || span > padded) {
    throw DimensionError("conv1d: kernel " + to_string(kernel.shape()) + " larger than padded input " +
                         to_string(x.shape()));
  }
  const std::size_t out_len = (padded - span) / opt.stride + 1;
  std::vector<double> out(cout * out_len, 0.0);
  const auto xd = x.data();
  const auto kd = kernel.data();
  const long pl = static_cast<long>(opt.pad_left);
  const long st = static_cast<long>(opt.stride);
  const long dil = static_cast<long>(opt.dilation);
  const long len = static_cast<long>(length);
  const long olen = static_cast<long>(out_len);

  // Valid output range [t0, t1) for tap k: 0 <= t*st + k*dil - pl < len.
  auto tap_range = [=](long k) {
    const long shift = k * dil - pl;
    long t0 = shift >= 0 ? 0 : (-shift + st - 1) / st;
    long t1 = (len - shift + st - 1) / st;
    if (len - shift <= 0) t1 = 0;
    return std::pair<long, long>{t0, std::min(t1, olen)};
  };

  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = out.data() + o * out_len;
    if (bias.defined()) std::fill_n(yo, out_len, bias[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xc = xd.data() + c * length;
      for (std::size_t k = 0; k < ksize; ++k) {
        const double w = kd[(o * cin + c) * ksize + k];
        const long shift = static_cast<long>(k) * dil - pl;
        auto [t0, t1] = tap_range(static_cast<long>(k));
        for (long t = t0; t < t1; ++t) yo[t] += w * xc[t * st + shift];
      }
    }
  }
  return make_result({cout, out_len}, std::move(out), {x, kernel, bias}, "conv1d",
                     [=](Node& self) {
                       const auto& xv = input_data(self, 0);
                       const auto& kv = input_data(self, 1);
                       auto* gx = input_grad(self, 0);
                       auto* gk = input_grad(self, 1);
                       auto* gb = input_grad(self, 2);
                       for (std::size_t o = 0; o < cout; ++o) {
                         const double* dy = self.grad.data() + o * out_len;
                         if (gb) {
                           double acc = 0.0;
                           for (std::size_t t = 0; t < out_len; ++t) acc += dy[t];
                           (*gb)[o] += acc;
                         }
                         for (std::size_t c = 0; c < cin; ++c) {
                           for (std::size_t k = 0; k < ksize; ++k) {
                             const std::size_t widx = (o * cin + c) * ksize + k;
                             const long shift = static_cast<long>(k) * dil - pl;
                             auto [t0, t1] = tap_range(static_cast<long>(k));
                             if (gk) {
                               const double* xc = xv.data() + c * length;
                               double acc = 0.0;
                               for (long t = t0; t < t1; ++t) acc += dy[t] * xc[t * st + shift];
                               (*gk)[widx] += acc;
                             }
                             if (gx) {
                               const double w = kv[widx];
                               double* gxc = gx->data() + c * length;
                               for (long t = t0; t < t1; ++t) gxc[t * st + shift] += w * dy[t];
                             }
                           }
                         }
                       }
                     });
}

Tensor conv1d_causal(const Tensor& x, const Tensor& kernel, long dilation, const Tensor& bias) {
  if (dilation < 1) throw ParameterError("conv1d_causal: dilation must be >= 1, got " + std::to_string(dilation));
  require_rank(kernel, 3, "conv1d_causal");
  if (kernel.dim(2) < 1) throw ParameterError("conv1d_causal: kernel size must be >= 1");
  Conv1dOptions opt;
  opt.dilation = static_cast<std::size_t>(dilation);
  opt.pad_left = opt.dilation * (kernel.dim(2) - 1);
  return conv1d(x, kernel, bias, opt);
}

Tensor conv3d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Triple stride, Triple padding) {
  require_rank(x, 4, "conv3d");
  require_rank(kernel, 5, "conv3d");
  const std::size_t cin = x.dim(0);
  const std::size_t cout = kernel.dim(0);
  if (kernel.dim(1) != cin) {
    throw DimensionError("conv3d: input " + to_string(x.shape()) + " does not match kernel " +
                         to_string(kernel.shape()));
  }
  if (bias.defined() && bias.size() != cout) {
    throw DimensionError("conv3d: bias " + to_string(bias.shape()) + " does not match kernel " +
                         to_string(kernel.shape()));
  }
  std::array<std::size_t, 3> in{x.dim(1), x.dim(2), x.dim(3)};
  std::array<std::size_t, 3> ks{kernel.dim(2), kernel.dim(3), kernel.dim(4)};
  std::array<std::size_t, 3> od{};
  for (int a = 0; a < 3; ++a) {
    if (stride[a] == 0) throw ParameterError("conv3d: stride must be positive");
    const std::size_t padded = in[a] + 2 * padding[a];
    if (ks[a] == 0 || ks[a] > padded) {
      throw DimensionError("conv3d: kernel " + to_string(kernel.shape()) + " larger than padded input " +
                           to_string(x.shape()));
    }
    od[a] = (padded - ks[a]) / stride[a] + 1;
  }
  const std::size_t T = in[0], H = in[1], W = in[2];
  const std::size_t oT = od[0], oH = od[1], oW = od[2];
  const std::size_t in_plane = T * H * W, out_plane = oT * oH * oW;

  // Valid output positions along one axis for kernel tap k.
  struct Range {
    long lo, hi;
  };
  auto range = [](long k, long st, long pad, long n_in, long n_out) {
    const long shift = k - pad;
    long lo = shift >= 0 ? 0 : (-shift + st - 1) / st;
    long hi = n_in - shift <= 0 ? 0 : (n_in - shift + st - 1) / st;
    return Range{lo, std::min(hi, n_out)};
  };

  // Visits every (output index, input index) pair touched by one kernel tap.
  auto for_tap = [=](std::size_t kt, std::size_t kh, std::size_t kw, auto&& body) {
    const auto rt = range(static_cast<long>(kt), static_cast<long>(stride[0]), static_cast<long>(padding[0]),
                          static_cast<long>(T), static_cast<long>(oT));
    const auto rh = range(static_cast<long>(kh), static_cast<long>(stride[1]), static_cast<long>(padding[1]),
                          static_cast<long>(H), static_cast<long>(oH));
    const auto rw = range(static_cast<long>(kw), static_cast<long>(stride[2]), static_cast<long>(padding[2]),
                          static_cast<long>(W), static_cast<long>(oW));
    if (rw.lo >= rw.hi) return;
    for (long ot = rt.lo; ot < rt.hi; ++ot) {
      const long it = ot * static_cast<long>(stride[0]) + static_cast<long>(kt) - static_cast<long>(padding[0]);
      for (long oh = rh.lo; oh < rh.hi; ++oh) {
        const long ih = oh * static_cast<long>(stride[1]) + static_cast<long>(kh) - static_cast<long>(padding[1]);
        const long iw0 = rw.lo * static_cast<long>(stride[2]) + static_cast<long>(kw) - static_cast<long>(padding[2]);
        const std::size_t out_row = (static_cast<std::size_t>(ot) * oH + static_cast<std::size_t>(oh)) * oW +
                                    static_cast<std::size_t>(rw.lo);
        const std::size_t in_row = (static_cast<std::size_t>(it) * H + static_cast<std::size_t>(ih)) * W +
                                   static_cast<std::size_t>(iw0);
        body(out_row, in_row, static_cast<std::size_t>(rw.hi - rw.lo), stride[2]);
      }
    }
  };

  const auto xd = x.data();
  const auto kd = kernel.data();
  const std::size_t kvol = ks[0] * ks[1] * ks[2];
  std::vector<double> out(cout * out_plane, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = out.data() + o * out_plane;
    if (bias.defined()) std::fill_n(yo, out_plane, bias[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xc = xd.data() + c * in_plane;
      const double* kc = kd.data() + (o * cin + c) * kvol;
      for (std::size_t kt = 0; kt < ks[0]; ++kt)
        for (std::size_t kh = 0; kh < ks[1]; ++kh)
          for (std::size_t kw = 0; kw < ks[2]; ++kw) {
            const double w = kc[(kt * ks[1] + kh) * ks[2] + kw];
            if (w == 0.0) continue;
            for_tap(kt, kh, kw, [&](std::size_t orow, std::size_t irow, std::size_t n, std::size_t sw) {
              double* y = yo + orow;
              const double* xi = xc + irow;
              for (std::size_t j = 0; j < n; ++j) y[j] += w * xi[j * sw];
            });
          }
    }
  }
  Shape shape{cout, oT, oH, oW};
  return make_result(std::move(shape), std::move(out), {x, kernel, bias}, "conv3d", [=](Node& self) {
    const auto& xv = input_data(self, 0);
    const auto& kv = input_data(self, 1);
    auto* gx = input_grad(self, 0);
    auto* gk = input_grad(self, 1);
    auto* gb = input_grad(self, 2);
    for (std::size_t o = 0; o < cout; ++o) {
      const double* dy = self.grad.data() + o * out_plane;
      if (gb) {
        double acc = 0.0;
        for (std::size_t i = 0; i < out_plane; ++i) acc += dy[i];
        (*gb)[o] += acc;
      }
      for (std::size_t c = 0; c < cin; ++c) {
        const std::size_t kbase = (o * cin + c) * kvol;
        for (std::size_t kt = 0; kt < ks[0]; ++kt)
          for (std::size_t kh = 0; kh < ks[1]; ++kh)
            for (std::size_t kw = 0; kw < ks[2]; ++kw) {
              const std::size_t widx = kbase + (kt * ks[1] + kh) * ks[2] + kw;
              const double w = kv[widx];
              double acc = 0.0;
              for_tap(kt, kh, kw, [&](std::size_t orow, std::size_t irow, std::size_t n, std::size_t sw) {
                const double* g = dy + orow;
                if (gk) {
                  const double* xi = xv.data() + c * in_plane + irow;
                  for (std::size_t j = 0; j < n; ++j) acc += g[j] * xi[j * sw];
                }
                if (gx && w != 0.0) {
                  double* gi = gx->data() + c * in_plane + irow;
                  for (std::size_t j = 0; j < n; ++j) gi[j * sw] += w * g[j];
                }
              });
              if (gk) (*gk)[widx] += acc;
            }
      }
    }
  });
}

Tensor conv1x1_channels(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  require_rank(kernel, 2, "conv1x1_channels");
  if (x.rank() < 1 || x.dim(0) != kernel.dim(1)) {
    throw DimensionError("conv1x1_channels: input " + to_string(x.shape()) + " does not match kernel " +
                         to_string(kernel.shape()));
  }
  const std::size_t cout = kernel.dim(0), cin = kernel.dim(1);
  if (bias.defined() && bias.size() != cout) {
    throw DimensionError("conv1x1_channels: bias " + to_string(bias.shape()) + " does not match kernel " +
                         to_string(kernel.shape()));
  }
  const std::size_t positions = x.size() / cin;
  std::vector<double> out(cout * positions, 0.0);
  if (bias.defined()) {
    for (std::size_t o = 0; o < cout; ++o) std::fill_n(out.data() + o * positions, positions, bias[o]);
  }
  // kernel [cout, cin] x input [cin, positions]
  gemm_acc(kernel.data().data(), x.data().data(), out.data(), cout, cin, positions);
  Shape shape = x.shape();
  shape[0] = cout;
  return make_result(std::move(shape), std::move(out), {x, kernel, bias}, "conv1x1",
                     [cout, cin, positions](Node& self) {
                       if (auto* g = input_grad(self, 0))
                         gemm_acc_at(input_data(self, 1).data(), self.grad.data(), g->data(), cout, cin, positions);
                       if (auto* g = input_grad(self, 1))
                         gemm_acc_bt(self.grad.data(), input_data(self, 0).data(), g->data(), cout, cin, positions);
                       if (auto* g = input_grad(self, 2)) {
                         for (std::size_t o = 0; o < cout; ++o) {
                           double acc = 0.0;
                           for (std::size_t p = 0; p < positions; ++p) acc += self.grad[o * positions + p];
                           (*g)[o] += acc;
                         }
                       }
                     });
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p, bool causal_mask, bool last_query_only,
                            std::vector<Tensor>* weights_out) {
  require_rank(x, 2, "multi_head_attention");
  const std::size_t steps = x.dim(0), d_model = x.dim(1);
  if (p.heads == 0 || d_model % p.heads != 0) {
    throw ParameterError("multi_head_attention: d_model " + std::to_string(d_model) + " not divisible by " +
                         std::to_string(p.heads) + " heads");
  }
  const std::size_t head_dim = d_model / p.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const Tensor queries_in = last_query_only ? slice(x, 0, steps - 1, steps) : x;
  const std::size_t query_offset = last_query_only ? steps - 1 : 0;

  const Tensor q = linear(queries_in, p.wq, p.bq);
  const Tensor k = linear(x, p.wk, p.bk);
  const Tensor v = linear(x, p.wv, p.bv);
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    const Tensor qh = p.heads == 1 ? q : slice(q, 1, lo, hi);
    const Tensor kh = p.heads == 1 ? k : slice(k, 1, lo, hi);
    const Tensor vh = p.heads == 1 ? v : slice(v, 1, lo, hi);
    const Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    const Tensor weights = causal_mask ? causal_softmax(scores, query_offset) : softmax_lastdim(scores);
    if (weights_out) weights_out->push_back(weights);
    heads.push_back(matmul(weights, vh));
  }
  const Tensor merged = p.heads == 1 ? heads[0] : concat(heads, 1);
  return linear(merged, p.wo, p.bo);
}

Tensor cross_entropy_logits(const Tensor& logits, const std::vector<std::size_t>& targets) {
  require_rank(logits, 2, "cross_entropy_logits");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy_logits: " + std::to_string(targets.size()) + " targets for logits " +
                         to_string(logits.shape()));
  }
  std::vector<double> probs(logits.size());
  double total = 0.0;
  const auto x = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) throw BoundsError("cross_entropy_logits: target bin out of range");
    const double* xr = x.data() + r * cols;
    const double m = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (probs[r * cols + c] = std::exp(xr[c] - m));
    for (std::size_t c = 0; c < cols; ++c) probs[r * cols + c] /= z;
    total += (m + std::log(z)) - xr[targets[r]];
  }
  const double inv_rows = 1.0 / static_cast<double>(rows);
  return make_result({1}, {total * inv_rows}, {logits}, "cross_entropy",
                     [probs = std::move(probs), targets, cols, inv_rows](Node& self) {
                       auto* g = input_grad(self, 0);
                       if (!g) return;
                       const double s = self.grad[0] * inv_rows;
                       for (std::size_t i = 0; i < probs.size(); ++i) (*g)[i] += s * probs[i];
                       for (std::size_t r = 0; r < targets.size(); ++r) (*g)[r * cols + targets[r]] -= s;
                     });
}

}  // namespace foley::ops
