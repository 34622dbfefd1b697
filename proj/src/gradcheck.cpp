// SPDX-License-Identifier: Apache-2.0
#include "vgt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vgt/error.hpp"

namespace vgt {

namespace {

double eval_scalar(const std::function<Tensor()>& fn) {
  NoGradGuard guard;
  Tensor out = fn();
  check(out.size() == 1, "finite_diff_check: function must be scalar-valued");
  return out.item();
}

void require_deterministic(const std::function<Tensor()>& fn) {
  const double a = eval_scalar(fn);
  const double b = eval_scalar(fn);
  if (std::memcmp(&a, &b, sizeof(double)) != 0) {
    throw Error("finite_diff_check: function is not deterministic");
  }
}

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double finite_diff_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& point,
                         double step) {
  check(step > 0.0 && std::isfinite(step), "finite_diff_check: step must be positive");
  Tensor x(point.shape(), std::vector<double>(point.values().begin(), point.values().end()), true);
  std::function<Tensor()> bound = [&] { return fn(x); };
  require_deterministic(bound);

  Tensor out = fn(x);
  check(out.size() == 1, "finite_diff_check: function must be scalar-valued");
  backward(out);
  std::vector<double> analytic(x.size(), 0.0);
  if (!x.grad().empty()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

  double worst = 0.0;
  auto xs = x.mutable_values();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double orig = xs[i];
    xs[i] = orig + step;
    const double up = eval_scalar(bound);
    xs[i] = orig - step;
    const double down = eval_scalar(bound);
    xs[i] = orig;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

double finite_diff_check_params(const std::function<Tensor()>& fn, ParamStore& params, double step,
                                const std::string& prefix) {
  check(step > 0.0 && std::isfinite(step), "finite_diff_check: step must be positive");
  require_deterministic(fn);

  Tensor out = fn();
  check(out.size() == 1, "finite_diff_check: function must be scalar-valued");
  const GradMap grads = backward(out, params);

  double worst = 0.0;
  for (const auto& [name, tensor] : params.tensors()) {
    if (name.rfind(prefix, 0) != 0 || params.is_frozen(name)) continue;
    auto xs = params.get(name).mutable_values();
    const auto& g = grads.at(name);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double orig = xs[i];
      xs[i] = orig + step;
      const double up = eval_scalar(fn);
      xs[i] = orig - step;
      const double down = eval_scalar(fn);
      xs[i] = orig;
      worst = std::max(worst, rel_error(g[i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

}  // namespace vgt
