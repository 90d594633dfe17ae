#pragma once

#include <cstdint>

#include "entangle/param_store.hpp"

namespace entangle {

/// rmsprop with decoupled L2 shrinkage. momentum_decay is the coefficient on
/// the incoming squared gradient in the moving average (0.1 keeps 0.9 of the
/// old cache), matching the lecture formulation the hyperparameters come from.
struct RmspropConfig {
  double learning_rate = 0.0005;
  double momentum_decay = 0.1;
  double weight_decay = 0.01;
  double epsilon = 1e-8;
};

/// cache <- (1-d)*cache + d*g^2;  theta <- theta - lr*g/(sqrt(cache)+eps) - lr*wd*theta.
/// Gradients are zeroed afterwards.
void rmsprop_step(ParamStore& params, const RmspropConfig& cfg);

struct Schedule {
  enum class Kind { Constant, LinearRamp };
  Kind kind = Kind::Constant;
  double start_value = 0.0;
  double end_value = 0.0;
  std::int64_t start_step = 0;
  std::int64_t end_step = 0;

  static Schedule constant(double value);
  static Schedule linear_ramp(double start_value, double end_value, std::int64_t start_step,
                              std::int64_t end_step);
};

/// Linear interpolation on [start_step, end_step], clamped outside the ramp.
double schedule_value(const Schedule& s, std::int64_t step);

}  // namespace entangle
