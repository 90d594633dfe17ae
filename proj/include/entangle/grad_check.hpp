#pragma once

#include <functional>
#include <string>

#include "entangle/param_store.hpp"

namespace entangle {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

/// Central finite difference (f(t+e) - f(t-e)) / 2e for every scalar parameter,
/// compared against the analytic gradient the callable accumulates.
///
/// `loss_and_grad` must compute the scalar loss and add its gradient into the
/// store's grad buffers. It must be deterministic (freeze any noise source).
/// Relative error per scalar: |analytic - numeric| / max(1, |numeric|).
GradCheckReport grad_check(const std::function<double(ParamStore&)>& loss_and_grad,
                           ParamStore& params, double eps);

}  // namespace entangle
