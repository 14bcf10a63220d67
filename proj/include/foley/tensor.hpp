#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace foley {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Scalar precision of op outputs. Storage is always double; in f32 mode every
// op result is rounded to the nearest float so training runs see 32-bit values.
enum class Precision { f64, f32 };

// Engine settings are per thread: distinct threads run independent engines.
void set_precision(Precision p);
Precision precision();

bool grad_enabled();

// Disables graph recording for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct Node;
using BackwardFn = std::function<void(Node& self)>;

// One record on the gradient tape. Leaves have no inputs and no backward fn.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  std::uint64_t grad_epoch = 0;  // backward pass that last wrote grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
  const char* op = "leaf";
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  // Writable view for leaves (parameter updates, test fixtures).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return node_->data[i]; }

  // Gradient from the most recent backward; zeros if none has reached this node.
  std::span<const double> grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value);
  void zero_grad();
  bool is_leaf() const { return node_->inputs.empty(); }

  // Same values, no tape history.
  Tensor detach() const;

  const Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds an op result. The output joins the tape only when recording is on
// and some input requires grad; `fn` must then accumulate self.grad into the
// grads of those inputs that require grad.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs, const char* op,
                   BackwardFn fn);

// Nodes reachable from `root` that require grad, inputs before consumers.
std::vector<const Node*> topological_order(const Tensor& root);

// Reverse-mode sweep from a scalar loss. Every reachable node's grad is
// overwritten (not accumulated) by this call.
void backward(const Tensor& loss);

}  // namespace foley
