// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vgt/param_store.hpp"

namespace vgt {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  std::uint64_t step = 0;
  double base_lr = 1e-3;
  /// Length of the cosine schedule; the rate reaches zero at this step.
  std::uint64_t total_steps = 1;
  AdamHyper hyper;
};

/// base_lr * 0.5 * (1 + cos(pi * t / T)), with t clamped to [0, T].
double cosine_lr(double base_lr, std::uint64_t step, std::uint64_t total_steps);

/// One Adam update with bias correction at the current schedule rate.
/// Frozen parameters are left untouched; the step counter always advances.
void adam_step(ParamStore& params, const GradMap& grads, OptimizerState& state);

}  // namespace vgt
