#include "entangle/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace entangle {

GradCheckReport grad_check(const std::function<double(ParamStore&)>& loss_and_grad,
                           ParamStore& params, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw std::invalid_argument("grad_check: eps outside (0, 1e-2]");

  params.zero_grads();
  loss_and_grad(params);

  // Snapshot the analytic gradient; the probe evaluations below overwrite it.
  std::map<std::string, Tensor> analytic;
  for (const auto& [name, e] : params.entries()) analytic.emplace(name, e.grad);

  GradCheckReport report;
  for (auto& [name, e] : params.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      double saved = e.value[i];
      e.value[i] = saved + eps;
      params.zero_grads();
      double up = loss_and_grad(params);
      e.value[i] = saved - eps;
      params.zero_grads();
      double down = loss_and_grad(params);
      e.value[i] = saved;

      double numeric = (up - down) / (2.0 * eps);
      double rel = std::abs(analytic.at(name)[i] - numeric) / std::max(1.0, std::abs(numeric));
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = i;
      }
    }
  }

  // Leave the store with the analytic gradient of the unperturbed point.
  for (auto& [name, e] : params.entries()) e.grad = analytic.at(name);
  return report;
}

}  // namespace entangle
