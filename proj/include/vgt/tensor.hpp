// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision tensors with tape-free reverse-mode autodiff.
// Every op builds a node that owns its inputs; backward() walks the graph
// reachable from a scalar loss in reverse topological order.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vgt {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Handle to a node of the computation graph. Copies share the node.
///
/// Rank-0 and rank-1 tensors are viewed as 1 x n matrices by the matrix ops,
/// so a bias of shape {n} and a row of shape {1, n} are interchangeable.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor row(std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  /// Writable storage; only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t r, std::size_t c) const;
  double operator[](std::size_t i) const { return values()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  /// Accumulated gradient; empty until a backward pass reaches this node.
  std::span<const double> grad() const;
  void zero_grad();

  /// Copy of the values with no graph attached.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread while alive.
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

/// Accumulates d(loss)/d(node) into every reachable node that requires grad.
void backward(const Tensor& loss);

// Elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor elu(const Tensor& x);
Tensor relu(const Tensor& x);

/// x (m x n) + b broadcast over rows; b has n elements.
Tensor add_bias(const Tensor& x, const Tensor& b);

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
/// a holds `groups` stacked (p x q) blocks, b holds stacked (q x r) blocks;
/// result stacks the per-group products (groups*p x r).
Tensor batched_matmul(const Tensor& a, const Tensor& b, std::size_t groups);
/// a: stacked (p x q), b: stacked (r x q); result stacks a_g * b_g^T.
Tensor batched_matmul_nt(const Tensor& a, const Tensor& b, std::size_t groups);

// Structure
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
/// Row gather; repeated indices accumulate gradient.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
Tensor reshape(const Tensor& x, Shape shape);

// Normalization
Tensor softmax_rows(const Tensor& x);
/// Softmax over each row where key_mask (groups x cols, 1 = keep) selects the
/// columns that participate; row r uses mask row r / rows_per_group. Masked
/// logits are replaced by -1e9.
Tensor masked_softmax_rows(const Tensor& x, std::span<const std::uint8_t> key_mask,
                           std::size_t rows_per_group);
Tensor log_softmax_rows(const Tensor& x);
/// Normalizes over the last axis with population variance; eps inside sqrt.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Reductions
Tensor sum(const Tensor& x);
Tensor mean_rows(const Tensor& x);
/// Mean over consecutive blocks of `segment` rows.
Tensor segment_mean_rows(const Tensor& x, std::size_t segment);
/// Mean over the rows whose flag is set.
Tensor masked_mean_rows(const Tensor& x, std::span<const std::uint8_t> row_mask);
Tensor pick(const Tensor& x, std::size_t r, std::size_t c);
Tensor add_n(std::span<const Tensor> scalars);

/// -log softmax(logits)[gold] for a single row of logits.
Tensor cross_entropy(const Tensor& logits, std::size_t gold);

}  // namespace vgt
