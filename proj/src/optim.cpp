// SPDX-License-Identifier: Apache-2.0
#include "vgt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vgt/error.hpp"

namespace vgt {

double cosine_lr(double base_lr, std::uint64_t step, std::uint64_t total_steps) {
  check(base_lr >= 0.0, "cosine_lr: negative base learning rate");
  if (total_steps == 0) return base_lr;
  const double t = static_cast<double>(std::min(step, total_steps));
  const double lr = base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t / static_cast<double>(total_steps)));
  return std::max(lr, 0.0);
}

void adam_step(ParamStore& params, const GradMap& grads, OptimizerState& state) {
  // Validate everything first so a bad gradient leaves no partial update.
  for (const auto& [name, g] : grads) {
    const Tensor& p = params.get(name);
    if (g.size() != p.size()) {
      throw Error("adam_step: gradient for '" + name + "' has " + std::to_string(g.size()) +
                  " elements, parameter has " + std::to_string(p.size()));
    }
  }

  const double lr = cosine_lr(state.base_lr, state.step, state.total_steps);
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step + 1);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);

  for (const auto& [name, g] : grads) {
    if (params.is_frozen(name)) continue;
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) m.assign(g.size(), 0.0);
    if (v.empty()) v.assign(g.size(), 0.0);
    auto w = params.get(name).mutable_values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
  ++state.step;
}

}  // namespace vgt
