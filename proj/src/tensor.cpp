// SPDX-License-Identifier: Apache-2.0
#include "vgt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "vgt/error.hpp"

namespace vgt {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

thread_local bool g_grad_enabled = true;

constexpr double kMaskedLogit = -1e9;

std::size_t rows_of(const Shape& s) { return s.size() < 2 ? 1 : s[0]; }
std::size_t cols_of(const Shape& s) {
  if (s.empty()) return 1;
  if (s.size() == 1) return s[0];
  return shape_size(s) / s[0];
}

void require(bool cond, const char* op, const std::string& msg) {
  if (!cond) throw Error(std::string(op) + ": " + msg);
}

// Result node; records inputs and the backward rule only when some input
// participates in differentiation.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<NodePtr> inputs, std::function<void(Node&)> bw) {
  for (double v : value) {
    if (!std::isfinite(v)) throw Error(std::string(op) + ": non-finite value in output");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(bw);
  }
  return Tensor(std::move(node));
}

void check_defined(const Tensor& t, const char* op) {
  require(t.defined(), op, "undefined tensor");
}

// C (+)= A(m x k) * B(k x n)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C (+)= A(m x k) * B(n x k)^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
  }
}

// C (+)= A(m x k)^T * B(m x n)   -> C is k x n
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw Error("Tensor: data length " + std::to_string(values.size()) +
                " does not match shape " + shape_str(shape));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("Tensor: non-finite value");
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{1, n}, std::move(values));
}

const Shape& Tensor::shape() const {
  if (!node_) throw Error("Tensor: undefined");
  return node_->shape;
}

std::size_t Tensor::size() const { return shape_size(shape()); }
std::size_t Tensor::rows() const { return rows_of(shape()); }
std::size_t Tensor::cols() const { return cols_of(shape()); }

std::span<const double> Tensor::values() const {
  if (!node_) throw Error("Tensor: undefined");
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw Error("Tensor: undefined");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw Error("Tensor::item: tensor has " + std::to_string(size()) + " elements");
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  const std::size_t nc = cols();
  if (r >= rows() || c >= nc) throw Error("Tensor::at: index out of range");
  return node_->value[r * nc + c];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw Error("Tensor: undefined");
  node_->requires_grad = flag;
}

std::span<const double> Tensor::grad() const {
  if (!node_) throw Error("Tensor: undefined");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), std::vector<double>(values().begin(), values().end())); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------- backward

void backward(const Tensor& loss) {
  check_defined(loss, "backward");
  if (loss.size() != 1) {
    throw Error("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  const NodePtr& root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Intermediate gradients start from zero on every pass; leaves accumulate.
  for (Node* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

// ---------------------------------------------------------------- elementwise

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check_defined(a, op);
  check_defined(b, op);
  require(a.size() == b.size() && a.rows() == b.rows(), op,
          "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result("add", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      auto& g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result("sub", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      auto& g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result("mul", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      auto& g = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& g = y.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  check_defined(x, "scale");
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v *= factor;
  return make_result("scale", x.shape(), std::move(out), {x.node()}, [factor](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor elu(const Tensor& x) {
  check_defined(x, "elu");
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : std::expm1(xv[i]);
  return make_result("elu", x.shape(), std::move(out), {x.node()}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = in.value[i] > 0.0 ? 1.0 : self.value[i] + 1.0;
      g[i] += d * self.grad[i];
    }
  });
}

Tensor relu(const Tensor& x) {
  check_defined(x, "relu");
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return make_result("relu", x.shape(), std::move(out), {x.node()}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in.value[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  check_defined(x, "add_bias");
  check_defined(b, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  require(b.size() == n, "add_bias", "bias has " + std::to_string(b.size()) + " elements, expected " + std::to_string(n));
  std::vector<double> out(x.values().begin(), x.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return make_result("add_bias", x.shape(), std::move(out), {x.node(), b.node()}, [m, n](Node& self) {
    Node& xin = *self.inputs[0];
    Node& bin = *self.inputs[1];
    if (xin.requires_grad) {
      auto& g = xin.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (bin.requires_grad) {
      auto& g = bin.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

// ---------------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  require(b.rows() == k, "matmul",
          "inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result("matmul", Shape{m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (an.requires_grad) gemm_nt(self.grad.data(), bn.value.data(), an.grad_buffer().data(), m, n, k);
    if (bn.requires_grad) gemm_tn(an.value.data(), self.grad.data(), bn.grad_buffer().data(), m, k, n);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul_nt");
  check_defined(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  require(b.cols() == k, "matmul_nt",
          "inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  std::vector<double> out(m * n, 0.0);
  gemm_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result("matmul_nt", Shape{m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (an.requires_grad) gemm_nn(self.grad.data(), bn.value.data(), an.grad_buffer().data(), m, n, k);
    if (bn.requires_grad) gemm_tn(self.grad.data(), an.value.data(), bn.grad_buffer().data(), m, n, k);
  });
}

Tensor transpose(const Tensor& x) {
  check_defined(x, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  return make_result("transpose", Shape{n, m}, std::move(out), {x.node()}, [m, n](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
  });
}

Tensor batched_matmul(const Tensor& a, const Tensor& b, std::size_t groups) {
  check_defined(a, "batched_matmul");
  check_defined(b, "batched_matmul");
  require(groups > 0 && a.rows() % groups == 0 && b.rows() % groups == 0, "batched_matmul",
          "row counts not divisible by group count");
  const std::size_t p = a.rows() / groups, q = a.cols(), r = b.cols();
  require(b.rows() / groups == q, "batched_matmul", "block inner dimensions differ");
  std::vector<double> out(groups * p * r, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    gemm_nn(a.values().data() + g * p * q, b.values().data() + g * q * r, out.data() + g * p * r, p, q, r);
  }
  return make_result("batched_matmul", Shape{groups * p, r}, std::move(out), {a.node(), b.node()},
                     [groups, p, q, r](Node& self) {
                       Node& an = *self.inputs[0];
                       Node& bn = *self.inputs[1];
                       for (std::size_t g = 0; g < groups; ++g) {
                         const double* dc = self.grad.data() + g * p * r;
                         if (an.requires_grad)
                           gemm_nt(dc, bn.value.data() + g * q * r, an.grad_buffer().data() + g * p * q, p, r, q);
                         if (bn.requires_grad)
                           gemm_tn(an.value.data() + g * p * q, dc, bn.grad_buffer().data() + g * q * r, p, q, r);
                       }
                     });
}

Tensor batched_matmul_nt(const Tensor& a, const Tensor& b, std::size_t groups) {
  check_defined(a, "batched_matmul_nt");
  check_defined(b, "batched_matmul_nt");
  require(groups > 0 && a.rows() % groups == 0 && b.rows() % groups == 0, "batched_matmul_nt",
          "row counts not divisible by group count");
  const std::size_t p = a.rows() / groups, q = a.cols(), r = b.rows() / groups;
  require(b.cols() == q, "batched_matmul_nt", "block inner dimensions differ");
  std::vector<double> out(groups * p * r, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    gemm_nt(a.values().data() + g * p * q, b.values().data() + g * r * q, out.data() + g * p * r, p, q, r);
  }
  return make_result("batched_matmul_nt", Shape{groups * p, r}, std::move(out), {a.node(), b.node()},
                     [groups, p, q, r](Node& self) {
                       Node& an = *self.inputs[0];
                       Node& bn = *self.inputs[1];
                       for (std::size_t g = 0; g < groups; ++g) {
                         const double* dc = self.grad.data() + g * p * r;
                         if (an.requires_grad)
                           gemm_nn(dc, bn.value.data() + g * r * q, an.grad_buffer().data() + g * p * q, p, r, q);
                         if (bn.requires_grad)
                           gemm_tn(dc, an.value.data() + g * p * q, bn.grad_buffer().data() + g * r * q, p, r, q);
                       }
                     });
}

// ---------------------------------------------------------------- structure

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  std::vector<NodePtr> inputs;
  for (const auto& t : parts) {
    check_defined(t, "concat_cols");
    require(t.rows() == m, "concat_cols", "row counts differ");
    widths.push_back(t.cols());
    total += t.cols();
    inputs.push_back(t.node());
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    offset += widths[k];
  }
  return make_result("concat_cols", Shape{m, total}, std::move(out), std::move(inputs),
                     [m, total, widths](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         Node& in = *self.inputs[k];
                         if (in.requires_grad) {
                           auto& g = in.grad_buffer();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               g[i * widths[k] + j] += self.grad[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total_rows = 0;
  std::vector<NodePtr> inputs;
  std::vector<double> out;
  for (const auto& t : parts) {
    check_defined(t, "concat_rows");
    require(t.cols() == n, "concat_rows", "column counts differ");
    total_rows += t.rows();
    inputs.push_back(t.node());
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return make_result("concat_rows", Shape{total_rows, n}, std::move(out), std::move(inputs), [](Node& self) {
    std::size_t off = 0;
    for (auto& in : self.inputs) {
      const std::size_t len = in->value.size();
      if (in->requires_grad) {
        auto& g = in->grad_buffer();
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[off + i];
      }
      off += len;
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  check_defined(x, "slice_rows");
  const std::size_t n = x.cols();
  require(begin + count <= x.rows() && count > 0, "slice_rows", "range out of bounds");
  std::vector<double> out(x.values().begin() + begin * n, x.values().begin() + (begin + count) * n);
  return make_result("slice_rows", Shape{count, n}, std::move(out), {x.node()}, [begin, n](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * n + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  check_defined(x, "slice_cols");
  const std::size_t m = x.rows(), n = x.cols();
  require(begin + count <= n && count > 0, "slice_cols", "range out of bounds");
  std::vector<double> out(m * count);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(xv.data() + i * n + begin, count, out.data() + i * count);
  return make_result("slice_cols", Shape{m, count}, std::move(out), {x.node()}, [m, n, begin, count](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * n + begin + j] += self.grad[i * count + j];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  check_defined(x, "gather_rows");
  const std::size_t m = x.rows(), n = x.cols();
  require(!index.empty(), "gather_rows", "empty index");
  std::vector<double> out(index.size() * n);
  auto xv = x.values();
  for (std::size_t r = 0; r < index.size(); ++r) {
    require(index[r] < m, "gather_rows", "row index " + std::to_string(index[r]) + " out of range");
    std::copy_n(xv.data() + index[r] * n, n, out.data() + r * n);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  Shape out_shape{idx.size(), n};
  return make_result("gather_rows", std::move(out_shape), std::move(out), {x.node()},
                     [idx = std::move(idx), n](Node& self) {
                       auto& g = self.inputs[0]->grad_buffer();
                       for (std::size_t r = 0; r < idx.size(); ++r)
                         for (std::size_t j = 0; j < n; ++j) g[idx[r] * n + j] += self.grad[r * n + j];
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_defined(x, "reshape");
  require(shape_size(shape) == x.size(), "reshape",
          "cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result("reshape", std::move(shape), std::move(out), {x.node()}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------- normalization

namespace {

void softmax_backward(Node& self) {
  auto& g = self.inputs[0]->grad_buffer();
  const std::size_t m = rows_of(self.shape), n = cols_of(self.shape);
  for (std::size_t i = 0; i < m; ++i) {
    const double* y = self.value.data() + i * n;
    const double* dy = self.grad.data() + i * n;
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
    for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (dy[j] - dot);
  }
}

void softmax_row(const double* x, double* y, std::size_t n) {
  double mx = x[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - mx);
    s += y[j];
  }
  for (std::size_t j = 0; j < n; ++j) y[j] /= s;
}

void require_finite_input(const Tensor& x, const char* op) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw Error(std::string(op) + ": non-finite input");
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
  check_defined(x, "softmax_rows");
  require_finite_input(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  require(n > 0, "softmax_rows", "empty rows");
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) softmax_row(x.values().data() + i * n, out.data() + i * n, n);
  return make_result("softmax_rows", x.shape(), std::move(out), {x.node()}, softmax_backward);
}

Tensor masked_softmax_rows(const Tensor& x, std::span<const std::uint8_t> key_mask,
                           std::size_t rows_per_group) {
  check_defined(x, "masked_softmax_rows");
  require_finite_input(x, "masked_softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  require(rows_per_group > 0 && m % rows_per_group == 0, "masked_softmax_rows", "bad group size");
  require(key_mask.size() == (m / rows_per_group) * n, "masked_softmax_rows", "mask size mismatch");
  std::vector<double> logits(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint8_t* keep = key_mask.data() + (i / rows_per_group) * n;
    for (std::size_t j = 0; j < n; ++j)
      if (!keep[j]) logits[i * n + j] = kMaskedLogit;
  }
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) softmax_row(logits.data() + i * n, out.data() + i * n, n);
  return make_result("masked_softmax_rows", x.shape(), std::move(out), {x.node()}, softmax_backward);
}

Tensor log_softmax_rows(const Tensor& x) {
  check_defined(x, "log_softmax_rows");
  require_finite_input(x, "log_softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  require(n > 0, "log_softmax_rows", "empty rows");
  std::vector<double> out(m * n);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = xv.data() + i * n;
    double mx = xi[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(xi[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xi[j] - lse;
  }
  return make_result("log_softmax_rows", x.shape(), std::move(out), {x.node()}, [m, n](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += self.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        g[i * n + j] += self.grad[i * n + j] - std::exp(self.value[i * n + j]) * s;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  check_defined(x, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  require(n > 0, "layer_norm", "zero-length last axis");
  require(gain.size() == n && bias.size() == n, "layer_norm", "gain/bias size mismatch");
  std::vector<double> xhat(m * n), out(m * n), inv_sigma(m);
  auto xv = x.values(), gv = gain.values(), bv = bias.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = xv.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xi[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(n);
    inv_sigma[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xi[j] - mean) * inv_sigma[i];
      out[i * n + j] = gv[j] * xhat[i * n + j] + bv[j];
    }
  }
  return make_result("layer_norm", x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
                     [m, n, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Node& self) {
                       Node& xn = *self.inputs[0];
                       Node& gn = *self.inputs[1];
                       Node& bn = *self.inputs[2];
                       if (gn.requires_grad) {
                         auto& g = gn.grad_buffer();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j] * xhat[i * n + j];
                       }
                       if (bn.requires_grad) {
                         auto& g = bn.grad_buffer();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
                       }
                       if (xn.requires_grad) {
                         auto& g = xn.grad_buffer();
                         const double inv_n = 1.0 / static_cast<double>(n);
                         for (std::size_t i = 0; i < m; ++i) {
                           double mean_d = 0.0, mean_dx = 0.0;
                           for (std::size_t j = 0; j < n; ++j) {
                             const double d = self.grad[i * n + j] * gn.value[j];
                             mean_d += d;
                             mean_dx += d * xhat[i * n + j];
                           }
                           mean_d *= inv_n;
                           mean_dx *= inv_n;
                           for (std::size_t j = 0; j < n; ++j) {
                             const double d = self.grad[i * n + j] * gn.value[j];
                             g[i * n + j] += inv_sigma[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
                           }
                         }
                       }
                     });
}

// ---------------------------------------------------------------- reductions

Tensor sum(const Tensor& x) {
  check_defined(x, "sum");
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result("sum", Shape{}, {s}, {x.node()}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean_rows(const Tensor& x) {
  check_defined(x, "mean_rows");
  return segment_mean_rows(x, x.rows());
}

Tensor segment_mean_rows(const Tensor& x, std::size_t segment) {
  check_defined(x, "segment_mean_rows");
  const std::size_t m = x.rows(), n = x.cols();
  require(segment > 0 && m % segment == 0, "segment_mean_rows", "rows not divisible by segment length");
  const std::size_t groups = m / segment;
  const double inv = 1.0 / static_cast<double>(segment);
  std::vector<double> out(groups * n, 0.0);
  auto xv = x.values();
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t r = 0; r < segment; ++r)
      for (std::size_t j = 0; j < n; ++j) out[g * n + j] += xv[(g * segment + r) * n + j];
    for (std::size_t j = 0; j < n; ++j) out[g * n + j] *= inv;
  }
  return make_result("segment_mean_rows", Shape{groups, n}, std::move(out), {x.node()},
                     [groups, segment, n, inv](Node& self) {
                       auto& g = self.inputs[0]->grad_buffer();
                       for (std::size_t s = 0; s < groups; ++s)
                         for (std::size_t r = 0; r < segment; ++r)
                           for (std::size_t j = 0; j < n; ++j)
                             g[(s * segment + r) * n + j] += inv * self.grad[s * n + j];
                     });
}

Tensor masked_mean_rows(const Tensor& x, std::span<const std::uint8_t> row_mask) {
  check_defined(x, "masked_mean_rows");
  const std::size_t m = x.rows(), n = x.cols();
  require(row_mask.size() == m, "masked_mean_rows", "mask length mismatch");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < m; ++i)
    if (row_mask[i]) rows.push_back(i);
  require(!rows.empty(), "masked_mean_rows", "no rows selected");
  const double inv = 1.0 / static_cast<double>(rows.size());
  std::vector<double> out(n, 0.0);
  auto xv = x.values();
  for (std::size_t r : rows)
    for (std::size_t j = 0; j < n; ++j) out[j] += xv[r * n + j];
  for (double& v : out) v *= inv;
  return make_result("masked_mean_rows", Shape{1, n}, std::move(out), {x.node()},
                     [rows = std::move(rows), n, inv](Node& self) {
                       auto& g = self.inputs[0]->grad_buffer();
                       for (std::size_t r : rows)
                         for (std::size_t j = 0; j < n; ++j) g[r * n + j] += inv * self.grad[j];
                     });
}

Tensor pick(const Tensor& x, std::size_t r, std::size_t c) {
  check_defined(x, "pick");
  const std::size_t n = x.cols();
  require(r < x.rows() && c < n, "pick", "index out of range");
  const std::size_t flat = r * n + c;
  return make_result("pick", Shape{}, {x.values()[flat]}, {x.node()}, [flat](Node& self) {
    self.inputs[0]->grad_buffer()[flat] += self.grad[0];
  });
}

Tensor add_n(std::span<const Tensor> scalars) {
  require(!scalars.empty(), "add_n", "no inputs");
  double s = 0.0;
  std::vector<NodePtr> inputs;
  for (const auto& t : scalars) {
    check_defined(t, "add_n");
    require(t.size() == 1, "add_n", "inputs must be scalars");
    s += t.values()[0];
    inputs.push_back(t.node());
  }
  return make_result("add_n", Shape{}, {s}, std::move(inputs), [](Node& self) {
    for (auto& in : self.inputs)
      if (in->requires_grad) in->grad_buffer()[0] += self.grad[0];
  });
}

Tensor cross_entropy(const Tensor& logits, std::size_t gold) {
  check_defined(logits, "cross_entropy");
  require(logits.rows() == 1, "cross_entropy", "expects a single row of logits");
  require(gold < logits.cols(), "cross_entropy",
          "gold index " + std::to_string(gold) + " out of range for " + std::to_string(logits.cols()) + " classes");
  return scale(pick(log_softmax_rows(logits), 0, gold), -1.0);
}

}  // namespace vgt
