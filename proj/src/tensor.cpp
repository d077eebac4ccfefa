#include "varmaformer/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace varmaformer {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> data, bool requires_grad,
                                const char* op) {
  if (element_count(shape) != data.size()) {
    throw ShapeError(std::string(op) + ": shape " + to_string(shape) + " holds " +
                     std::to_string(element_count(shape)) + " elements, got " +
                     std::to_string(data.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  node->op = op;
  return node;
}

// Builds an op result; the graph edge is recorded only when it can matter.
Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward_fn) {
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor* t : inputs) needs_grad = needs_grad || t->requires_grad();
  }
  auto node = make_node(std::move(shape), std::move(data), needs_grad, op);
  if (needs_grad) {
    for (const Tensor* t : inputs) node->parents.push_back(t->shared());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   const std::vector<Tensor>& inputs, std::function<void(Node&)> backward_fn) {
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  auto node = make_node(std::move(shape), std::move(data), needs_grad, op);
  if (needs_grad) {
    for (const Tensor& t : inputs) node->parents.push_back(t.shared());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of a parent, or an empty span when it takes no gradient.
std::span<double> grad_of(Node& parent) {
  if (!parent.requires_grad) return {};
  parent.ensure_grad();
  return parent.grad;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                   to_string(b));
}

void require_rank_at_least(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() < rank) {
    throw ShapeError(std::string(op) + ": needs rank >= " + std::to_string(rank) + ", got " +
                     to_string(x.shape()));
  }
}

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  bool same = false;
};

std::vector<std::size_t> padded_strides(const Shape& shape, const Shape& out) {
  const std::size_t rank = out.size();
  const std::size_t offset = rank - shape.size();
  std::vector<std::size_t> strides(rank, 0);
  std::size_t stride = 1;
  for (std::size_t d = shape.size(); d-- > 0;) {
    strides[d + offset] = shape[d] == 1 ? 0 : stride;
    stride *= shape[d];
  }
  return strides;
}

BroadcastPlan plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  plan.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) shape_mismatch(op, a, b);
    plan.out[i] = std::max(da, db);
  }
  plan.stride_a = padded_strides(a, plan.out);
  plan.stride_b = padded_strides(b, plan.out);
  return plan;
}

template <typename F>
void broadcast_loop(const BroadcastPlan& plan, F&& f) {
  const std::size_t n = element_count(plan.out);
  if (plan.same) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  const std::size_t rank = plan.out.size();
  std::vector<std::size_t> index(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++index[d];
      ia += plan.stride_a[d];
      ib += plan.stride_b[d];
      if (index[d] < plan.out[d]) break;
      ia -= plan.stride_a[d] * plan.out[d];
      ib -= plan.stride_b[d] * plan.out[d];
      index[d] = 0;
    }
  }
}

// outer x axis x inner decomposition used by concat/slice/mean.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.extent = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  }
  std::vector<double> data(element_count(shape), value);
  return Tensor(make_node(std::move(shape), std::move(data), requires_grad, "leaf"));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  }
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad, "leaf"));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor has shape " + to_string(shape()));
  return node_->data[0];
}

std::span<const double> Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(shape()));
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order of the reachable graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor add(const Tensor& a, const Tensor& b) {
  BroadcastPlan plan = plan_broadcast("add", a.shape(), b.shape());
  std::vector<double> out(element_count(plan.out));
  const auto da = a.data();
  const auto db = b.data();
  broadcast_loop(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = da[ia] + db[ib]; });
  Shape shape = plan.out;
  return make_result(std::move(shape), std::move(out), "add", {&a, &b}, [plan](Node& self) {
    auto ga = grad_of(*self.parents[0]);
    auto gb = grad_of(*self.parents[1]);
    const auto& g = self.grad;
    broadcast_loop(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      if (!ga.empty()) ga[ia] += g[i];
      if (!gb.empty()) gb[ib] += g[i];
    });
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  BroadcastPlan plan = plan_broadcast("sub", a.shape(), b.shape());
  std::vector<double> out(element_count(plan.out));
  const auto da = a.data();
  const auto db = b.data();
  broadcast_loop(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = da[ia] - db[ib]; });
  Shape shape = plan.out;
  return make_result(std::move(shape), std::move(out), "sub", {&a, &b}, [plan](Node& self) {
    auto ga = grad_of(*self.parents[0]);
    auto gb = grad_of(*self.parents[1]);
    const auto& g = self.grad;
    broadcast_loop(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      if (!ga.empty()) ga[ia] += g[i];
      if (!gb.empty()) gb[ib] -= g[i];
    });
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  BroadcastPlan plan = plan_broadcast("mul", a.shape(), b.shape());
  std::vector<double> out(element_count(plan.out));
  const auto da = a.data();
  const auto db = b.data();
  broadcast_loop(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = da[ia] * db[ib]; });
  Shape shape = plan.out;
  return make_result(std::move(shape), std::move(out), "mul", {&a, &b}, [plan](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    auto ga = grad_of(pa);
    auto gb = grad_of(pb);
    const auto& g = self.grad;
    broadcast_loop(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      if (!ga.empty()) ga[ia] += g[i] * pb.data[ib];
      if (!gb.empty()) gb[ib] += g[i] * pa.data[ia];
    });
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), "scale", {&x}, [factor](Node& self) {
    auto gx = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * self.grad[i];
  });
}

Tensor matmul(const Tensor& x, const Tensor& w) {
  require_rank_at_least("matmul", x, 1);
  if (w.rank() != 2 || x.shape().back() != w.dim(0)) shape_mismatch("matmul", x.shape(), w.shape());
  const auto k = static_cast<Eigen::Index>(w.dim(0));
  const auto n = static_cast<Eigen::Index>(w.dim(1));
  const auto rows = static_cast<Eigen::Index>(x.size() / w.dim(0));
  Shape shape = x.shape();
  shape.back() = w.dim(1);
  std::vector<double> out(static_cast<std::size_t>(rows * n));
  MutMap(out.data(), rows, n).noalias() = ConstMap(x.data().data(), rows, k) * ConstMap(w.data().data(), k, n);
  return make_result(std::move(shape), std::move(out), "matmul", {&x, &w}, [rows, k, n](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    ConstMap g(self.grad.data(), rows, n);
    if (auto gx = grad_of(px); !gx.empty()) {
      MutMap(gx.data(), rows, k).noalias() += g * ConstMap(pw.data.data(), k, n).transpose();
    }
    if (auto gw = grad_of(pw); !gw.empty()) {
      MutMap(gw.data(), k, n).noalias() += ConstMap(px.data.data(), rows, k).transpose() * g;
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) shape_mismatch("bmm", a.shape(), b.shape());
  const auto batch = a.dim(0);
  const auto m = static_cast<Eigen::Index>(a.dim(1));
  const auto k = static_cast<Eigen::Index>(a.dim(2));
  const auto kb = static_cast<Eigen::Index>(transpose_b ? b.dim(2) : b.dim(1));
  const auto n = static_cast<Eigen::Index>(transpose_b ? b.dim(1) : b.dim(2));
  if (k != kb) shape_mismatch("bmm", a.shape(), b.shape());
  const auto size_a = static_cast<std::size_t>(m * k);
  const auto size_b = static_cast<std::size_t>(k * n);
  const auto size_c = static_cast<std::size_t>(m * n);
  std::vector<double> out(batch * size_c);
  for (std::size_t i = 0; i < batch; ++i) {
    ConstMap ma(a.data().data() + i * size_a, m, k);
    MutMap mc(out.data() + i * size_c, m, n);
    if (transpose_b) {
      mc.noalias() = ma * ConstMap(b.data().data() + i * size_b, n, k).transpose();
    } else {
      mc.noalias() = ma * ConstMap(b.data().data() + i * size_b, k, n);
    }
  }
  Shape shape{batch, static_cast<std::size_t>(m), static_cast<std::size_t>(n)};
  return make_result(std::move(shape), std::move(out), "bmm", {&a, &b},
                     [=](Node& self) {
                       Node& pa = *self.parents[0];
                       Node& pb = *self.parents[1];
                       auto ga = grad_of(pa);
                       auto gb = grad_of(pb);
                       for (std::size_t i = 0; i < batch; ++i) {
                         ConstMap g(self.grad.data() + i * size_c, m, n);
                         ConstMap ma(pa.data.data() + i * size_a, m, k);
                         if (transpose_b) {
                           ConstMap mb(pb.data.data() + i * size_b, n, k);
                           if (!ga.empty()) MutMap(ga.data() + i * size_a, m, k).noalias() += g * mb;
                           if (!gb.empty()) MutMap(gb.data() + i * size_b, n, k).noalias() += g.transpose() * ma;
                         } else {
                           ConstMap mb(pb.data.data() + i * size_b, k, n);
                           if (!ga.empty()) MutMap(ga.data() + i * size_a, m, k).noalias() += g * mb.transpose();
                           if (!gb.empty()) MutMap(gb.data() + i * size_b, k, n).noalias() += ma.transpose() * g;
                         }
                       }
                     });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + to_string(first));
  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) shape_mismatch("concat", first, s);
    shape[axis] += s[axis];
    extents.push_back(s[axis]);
  }
  const AxisSplit split = split_at(shape, axis);
  std::vector<double> out(element_count(shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::size_t width = extents[p] * split.inner;
    const auto src = parts[p].data();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(src.begin() + o * width, width, out.begin() + o * split.extent * split.inner + offset);
    }
    offset += width;
  }
  return make_result(std::move(shape), std::move(out), "concat", parts, [split, extents](Node& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      const std::size_t width = extents[p] * split.inner;
      auto gp = grad_of(*self.parents[p]);
      if (!gp.empty()) {
        for (std::size_t o = 0; o < split.outer; ++o) {
          const double* g = self.grad.data() + o * split.extent * split.inner + offset;
          for (std::size_t j = 0; j < width; ++j) gp[o * width + j] += g[j];
        }
      }
      offset += width;
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.rank() || begin >= end || end > x.dim(axis)) {
    throw ShapeError("slice: [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " invalid for " + to_string(x.shape()));
  }
  const AxisSplit split = split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = end - begin;
  const std::size_t width = (end - begin) * split.inner;
  const std::size_t start = begin * split.inner;
  std::vector<double> out(split.outer * width);
  const auto src = x.data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(src.begin() + o * split.extent * split.inner + start, width, out.begin() + o * width);
  }
  return make_result(std::move(shape), std::move(out), "slice", {&x}, [split, width, start](Node& self) {
    auto gx = grad_of(*self.parents[0]);
    for (std::size_t o = 0; o < split.outer; ++o) {
      double* g = gx.data() + o * split.extent * split.inner + start;
      for (std::size_t j = 0; j < width; ++j) g[j] += self.grad[o * width + j];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (element_count(shape) != x.size()) shape_mismatch("reshape", x.shape(), shape);
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {&x}, [](Node& self) {
    auto gx = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const std::size_t rank = x.rank();
  std::vector<bool> seen(rank, false);
  bool ok = axes.size() == rank;
  for (std::size_t i = 0; ok && i < rank; ++i) {
    ok = axes[i] < rank && !seen[axes[i]];
    if (ok) seen[axes[i]] = true;
  }
  if (!ok) throw ShapeError("permute: invalid axis order for " + to_string(x.shape()));

  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t d = rank; d-- > 1;) in_strides[d - 1] = in_strides[d] * x.dim(d);
  Shape shape(rank);
  std::vector<std::size_t> strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = x.dim(axes[i]);
    strides[i] = in_strides[axes[i]];
  }
  // source offset of each output element
  std::vector<std::size_t> source(x.size());
  {
    std::vector<std::size_t> index(rank, 0);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      source[i] = offset;
      for (std::size_t d = rank; d-- > 0;) {
        ++index[d];
        offset += strides[d];
        if (index[d] < shape[d]) break;
        offset -= strides[d] * shape[d];
        index[d] = 0;
      }
    }
  }
  std::vector<double> out(x.size());
  const auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[source[i]];
  return make_result(std::move(shape), std::move(out), "permute", {&x},
                     [source = std::move(source)](Node& self) {
                       auto gx = grad_of(*self.parents[0]);
                       for (std::size_t i = 0; i < source.size(); ++i) gx[source[i]] += self.grad[i];
                     });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw ShapeError("mean: axis out of range for " + to_string(x.shape()));
  const AxisSplit split = split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape = {1};
  std::vector<double> out(split.outer * split.inner, 0.0);
  const auto src = x.data();
  const double inv = 1.0 / static_cast<double>(split.extent);
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t k = 0; k < split.extent; ++k) {
      const double* row = src.data() + (o * split.extent + k) * split.inner;
      double* dst = out.data() + o * split.inner;
      for (std::size_t i = 0; i < split.inner; ++i) dst[i] += row[i];
    }
  }
  for (double& v : out) v *= inv;
  return make_result(std::move(shape), std::move(out), "mean", {&x}, [split, inv](Node& self) {
    auto gx = grad_of(*self.parents[0]);
    for (std::size_t o = 0; o < split.outer; ++o) {
      for (std::size_t k = 0; k < split.extent; ++k) {
        double* row = gx.data() + (o * split.extent + k) * split.inner;
        const double* g = self.grad.data() + o * split.inner;
        for (std::size_t i = 0; i < split.inner; ++i) row[i] += g[i] * inv;
      }
    }
  });
}

Tensor sum_all(const Tensor& x) {
  const double total = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  return make_result({1}, {total}, "sum_all", {&x}, [](Node& self) {
    auto gx = grad_of(*self.parents[0]);
    for (double& g : gx) g += self.grad[0];
  });
}

Tensor mean_all(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  const double total = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  return make_result({1}, {total * inv}, "mean_all", {&x}, [inv](Node& self) {
    auto gx = grad_of(*self.parents[0]);
    for (double& g : gx) g += self.grad[0] * inv;
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-src[i]));
  return make_result(x.shape(), std::move(out), "sigmoid", {&x}, [](Node& self) {
    auto gx = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double s = self.data[i];
      gx[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::vector<double> out(x.size());
  const auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * src[i] * (1.0 + std::erf(src[i] * kInvSqrt2));
  }
  return make_result(x.shape(), std::move(out), "gelu", {&x}, [](Node& self) {
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    Node& px = *self.parents[0];
    auto gx = grad_of(px);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double v = px.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gx[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor softmax(const Tensor& x) {
  require_rank_at_least("softmax", x, 1);
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  std::vector<double> out(x.size());
  const auto src = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = src.data() + r * width;
    double* y = out.data() + r * width;
    const double peak = *std::max_element(in, in + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) total += (y[j] = std::exp(in[j] - peak));
    for (std::size_t j = 0; j < width; ++j) y[j] /= total;
  }
  return make_result(x.shape(), std::move(out), "softmax", {&x}, [rows, width](Node& self) {
    auto gx = grad_of(*self.parents[0]);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * width;
      const double* g = self.grad.data() + r * width;
      double dot = 0.0;
      for (std::size_t j = 0; j < width; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < width; ++j) gx[r * width + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, double eps) {
  require_rank_at_least("layer_norm", x, 1);
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  std::vector<double> out(x.size());
  std::vector<double> inv_std(rows);
  const auto src = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = src.data() + r * width;
    double m = 0.0;
    for (std::size_t j = 0; j < width; ++j) m += in[j];
    m /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (in[j] - m) * (in[j] - m);
    var /= static_cast<double>(width);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) out[r * width + j] = (in[j] - m) * inv_std[r];
  }
  return make_result(x.shape(), std::move(out), "layer_norm", {&x},
                     [rows, width, inv_std = std::move(inv_std)](Node& self) {
                       auto gx = grad_of(*self.parents[0]);
                       const double n = static_cast<double>(width);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* y = self.data.data() + r * width;
                         const double* g = self.grad.data() + r * width;
                         double g_mean = 0.0;
                         double gy_mean = 0.0;
                         for (std::size_t j = 0; j < width; ++j) {
                           g_mean += g[j];
                           gy_mean += g[j] * y[j];
                         }
                         g_mean /= n;
                         gy_mean /= n;
                         for (std::size_t j = 0; j < width; ++j) {
                           gx[r * width + j] += inv_std[r] * (g[j] - g_mean - y[j] * gy_mean);
                         }
                       }
                     });
}

}  // namespace varmaformer
