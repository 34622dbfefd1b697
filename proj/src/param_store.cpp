// SPDX-License-Identifier: Apache-2.0
#include "vgt/param_store.hpp"

#include <cmath>

#include "vgt/error.hpp"

namespace vgt {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  check(!contains(name), "ParamStore: duplicate parameter '" + name + "'");
  value.set_requires_grad(true);
  return tensors_.emplace(name, std::move(value)).first->second;
}

Tensor& ParamStore::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  check(fan_in > 0, "ParamStore: fan_in must be positive for '" + name + "'");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return add(name, Tensor(std::move(shape), std::move(values)));
}

Tensor& ParamStore::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::filled(std::move(shape), value));
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::replace(const std::string& name, Tensor value) {
  Tensor& slot = get(name);
  value.set_requires_grad(true);
  slot = std::move(value);
}

void ParamStore::freeze(const std::string& name) {
  check(contains(name), "ParamStore: cannot freeze unknown parameter '" + name + "'");
  frozen_.insert(name);
}

void ParamStore::freeze_prefix(const std::string& prefix) {
  for (const auto& [name, _] : tensors_) {
    if (name.rfind(prefix, 0) == 0) frozen_.insert(name);
  }
}

void ParamStore::unfreeze_all() { frozen_.clear(); }

std::size_t ParamStore::count() const {
  std::size_t total = 0;
  for (const auto& [_, t] : tensors_) total += t.size();
  return total;
}

std::size_t ParamStore::count_prefix(const std::string& prefix) const {
  std::size_t total = 0;
  for (const auto& [name, t] : tensors_) {
    if (name.rfind(prefix, 0) == 0) total += t.size();
  }
  return total;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : tensors_) out.add(name, t.detach());
  out.frozen_ = frozen_;
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : tensors_) t.zero_grad();
}

GradMap ParamStore::gradients() const {
  GradMap out;
  for (const auto& [name, t] : tensors_) {
    auto g = t.grad();
    if (g.empty()) {
      out[name].assign(t.size(), 0.0);
    } else {
      out[name].assign(g.begin(), g.end());
    }
  }
  return out;
}

GradMap backward(const Tensor& loss, ParamStore& params) {
  params.zero_grad();
  backward(loss);
  return params.gradients();
}

}  // namespace vgt
