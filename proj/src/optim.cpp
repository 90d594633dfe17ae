#include "entangle/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace entangle {

void rmsprop_step(ParamStore& params, const RmspropConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("rmsprop_step: learning_rate <= 0");
  if (cfg.epsilon <= 0.0) throw std::invalid_argument("rmsprop_step: epsilon <= 0");
  const double d = cfg.momentum_decay;
  for (auto& [name, e] : params.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      double g = e.grad[i];
      e.rms_cache[i] = (1.0 - d) * e.rms_cache[i] + d * g * g;
      e.value[i] -= cfg.learning_rate * g / (std::sqrt(e.rms_cache[i]) + cfg.epsilon) +
                    cfg.learning_rate * cfg.weight_decay * e.value[i];
      e.grad[i] = 0.0;
    }
  }
}

Schedule Schedule::constant(double value) {
  Schedule s;
  s.kind = Kind::Constant;
  s.start_value = value;
  s.end_value = value;
  return s;
}

Schedule Schedule::linear_ramp(double start_value, double end_value, std::int64_t start_step,
                               std::int64_t end_step) {
  if (start_step > end_step)
    throw std::invalid_argument("Schedule::linear_ramp: start_step > end_step");
  Schedule s;
  s.kind = Kind::LinearRamp;
  s.start_value = start_value;
  s.end_value = end_value;
  s.start_step = start_step;
  s.end_step = end_step;
  return s;
}

double schedule_value(const Schedule& s, std::int64_t step) {
  if (s.kind == Schedule::Kind::Constant) return s.start_value;
  if (step <= s.start_step) return s.start_value;
  if (step >= s.end_step) return s.end_value;
  double t = static_cast<double>(step - s.start_step) /
             static_cast<double>(s.end_step - s.start_step);
  return s.start_value + (s.end_value - s.start_value) * t;
}

}  // namespace entangle
