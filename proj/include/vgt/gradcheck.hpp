// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

#include "vgt/param_store.hpp"
#include "vgt/tensor.hpp"

namespace vgt {

/// Central-difference check of a scalar function of one tensor.
/// Returns max over coordinates of |analytic - numeric| / max(1, |analytic|).
/// Throws if step <= 0, fn is not scalar, or fn is not deterministic.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& point,
                         double step = 1e-4);

/// Same check against every (non-frozen) parameter whose name starts with
/// `prefix`; fn reads the parameters from the store.
double finite_diff_check_params(const std::function<Tensor()>& fn, ParamStore& params,
                                double step = 1e-4, const std::string& prefix = "");

}  // namespace vgt
