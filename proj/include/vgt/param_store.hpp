// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "vgt/rng.hpp"
#include "vgt/tensor.hpp"

namespace vgt {

using GradMap = std::map<std::string, std::vector<double>>;

/// Every learnable tensor of a model, addressable by a dotted name.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor value);
  /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) of the given shape.
  Tensor& add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor& add_constant(const std::string& name, Shape shape, double value);

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  /// Replaces the stored tensor, keeping frozen status.
  void replace(const std::string& name, Tensor value);

  void freeze(const std::string& name);
  void freeze_prefix(const std::string& prefix);
  void unfreeze_all();
  bool is_frozen(const std::string& name) const { return frozen_.count(name) != 0; }
  const std::set<std::string>& frozen() const { return frozen_; }

  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::size_t count() const;
  std::size_t count_prefix(const std::string& prefix) const;

  /// Deep copy: tensors do not share storage with this store.
  ParamStore clone() const;

  void zero_grad();
  /// Current accumulated gradients; params never reached get zeros.
  GradMap gradients() const;

 private:
  std::map<std::string, Tensor> tensors_;
  std::set<std::string> frozen_;
};

/// Runs backward from `loss` and returns the gradient of every parameter.
GradMap backward(const Tensor& loss, ParamStore& params);

}  // namespace vgt
