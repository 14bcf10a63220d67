#include "foley/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "foley/errors.hpp"

namespace foley {

namespace {

struct EngineSettings {
  Precision precision = Precision::f64;
  bool grad_enabled = true;
};

EngineSettings& settings() {
  thread_local EngineSettings s;
  return s;
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                         to_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

void set_precision(Precision p) { settings().precision = p; }
Precision precision() { return settings().precision; }
bool grad_enabled() { return settings().grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(settings().grad_enabled) { settings().grad_enabled = false; }
NoGradGuard::~NoGradGuard() { settings().grad_enabled = previous_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw ContractError("mutable_data() is only available on leaf tensors");
  return node_->data;
}

double Tensor::item() const {
  if (node_->data.size() != 1) {
    throw ContractError("item() on tensor of shape " + to_string(node_->shape));
  }
  return node_->data[0];
}

namespace {
// Grads written by an earlier pass read as zero once a later pass has run.
thread_local std::uint64_t g_backward_epoch = 0;
}  // namespace

std::span<const double> Tensor::grad() const {
  const std::uint64_t epoch = g_backward_epoch;
  if (node_->grad.size() != node_->data.size() || node_->grad_epoch != epoch) {
    node_->grad.assign(node_->data.size(), 0.0);
    node_->grad_epoch = epoch;
  }
  return node_->grad;
}

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  node_->requires_grad = value;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->data.size(), 0.0);
  node_->grad_epoch = g_backward_epoch;
}

Tensor Tensor::detach() const { return from(node_->shape, node_->data, false); }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs, const char* op,
                   BackwardFn fn) {
  if (settings().precision == Precision::f32) {
    for (auto& v : data) v = static_cast<double>(static_cast<float>(v));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  if (settings().grad_enabled) {
    bool any = false;
    for (const auto& t : inputs) any = any || (t.defined() && t.requires_grad());
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (auto& t : inputs) node->inputs.push_back(t.defined() ? t.node_ptr() : nullptr);
      node->backward = std::move(fn);
    }
  }
  return Tensor(std::move(node));
}

std::vector<const Node*> topological_order(const Tensor& root) {
  std::vector<const Node*> order;
  if (!root.defined() || !root.requires_grad()) return order;
  std::unordered_set<const Node*> visited;
  // Iterative post-order DFS; tapes for long contexts are deep.
  std::vector<std::pair<const Node*, std::size_t>> stack;
  stack.emplace_back(&root.node(), 0);
  visited.insert(&root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("(undefined)")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss that does not depend on any tensor requiring grad");
  }
  auto order = topological_order(loss);
  const std::uint64_t epoch = ++g_backward_epoch;
  for (const Node* n : order) {
    auto* node = const_cast<Node*>(n);
    node->grad.assign(node->data.size(), 0.0);
    node->grad_epoch = epoch;
  }
  const_cast<Node&>(loss.node()).grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = const_cast<Node*>(*it);
    if (node->backward) node->backward(*node);
  }
}

}  // namespace foley
