#pragma once

// Dense float64 tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a cheap shared handle onto a graph node. Every op below
// records itself on the graph when at least one operand requires a
// gradient and no NoGradGuard is active; Tensor::backward() then walks
// the graph in reverse topological order and accumulates gradients into
// every node that requires them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace varmaformer {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::uint64_t id = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_->data.size(); }
  std::uint64_t id() const { return node_->id; }
  const char* op() const { return node_->op; }

  std::span<const double> data() const { return node_->data; }
  // Direct write access; only for leaves (parameter init, optimizer updates).
  std::span<double> mutable_data() { return node_->data; }
  double item() const;
  double at(std::size_t flat_index) const { return node_->data.at(flat_index); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Accumulated gradient; all zeros when nothing has reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Seeds d(this)/d(this) = 1 and back-propagates. Requires a one-element tensor.
  void backward() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// While alive, ops on this thread build no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Elementwise binary ops follow numpy broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// x[..., K] @ w[K, N] -> [..., N]
Tensor matmul(const Tensor& x, const Tensor& w);
// a[B, M, K] @ b[B, K, N] -> [B, M, N]; with transpose_b, b is [B, N, K].
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Half-open [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);

Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

Tensor sigmoid(const Tensor& x);
// Exact erf-based Gaussian error linear unit.
Tensor gelu(const Tensor& x);
// Along the last axis, max-subtracted.
Tensor softmax(const Tensor& x);
// Along the last axis, no affine part.
Tensor layer_norm(const Tensor& x, double eps = 1e-5);

}  // namespace varmaformer
