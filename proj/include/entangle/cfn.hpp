#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "entangle/nn.hpp"
#include "entangle/optim.hpp"
#include "entangle/param_store.hpp"
#include "entangle/rng.hpp"
#include "entangle/taskdata.hpp"

namespace entangle {

struct CfnConfig {
  std::size_t input_dim = 10;
  std::size_t num_tasks = 8;
  std::size_t num_functions = 8;
  std::size_t controller_hidden = 10;
  Schedule sharpen_gamma = Schedule::constant(1.0);
  double noise_sigma = 0.05;
  double epsilon_floor = 1e-6;
};

/// Ramp 1 -> 100 over the first 80% of training, then constant.
Schedule default_gamma_schedule(std::int64_t total_steps);

/// Distribution over the function layers.
struct WeightVector {
  Tensor w;
};

/// Single dense layer with a scalar-slope PReLU; input and output width match.
struct FunctionLayer {
  DenseLayer dense;
  std::string slope_name;
};

/// LSTM controller emitting a softmax weighting over F function layers.
class CfnModel {
 public:
  CfnModel(const CfnConfig& cfg, std::uint64_t seed);

  const CfnConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  LstmCell& controller() { return controller_; }
  const DenseLayer& head() const { return head_; }
  const std::vector<FunctionLayer>& functions() const { return functions_; }

  void reset_controller() { controller_.reset(); }
  double function_slope(std::size_t i) const;

 private:
  CfnConfig cfg_;
  ParamStore params_;
  LstmCell controller_;
  DenseLayer head_;
  std::vector<FunctionLayer> functions_;
};

/// One LSTM step on concat(x, one_hot), dense head, softmax.
/// Advances the controller state; reset_controller() first for a fresh episode.
WeightVector controller_weights(CfnModel& model, const Tensor& x, const Tensor& one_hot);

/// f_i(x) = prelu(W_i x + b_i, slope_i).
Tensor function_output(const CfnModel& model, std::size_t i, const Tensor& x);

/// sum_i w_i * f_i(x) for externally supplied weights.
Tensor cfn_combine(const CfnModel& model, const Tensor& x, const Tensor& weights);

/// Perturbs each entry with N(0, sigma^2), floors at epsilon_floor, raises to
/// gamma and renormalizes over the sharpened terms. Exponentiation runs in log
/// space. rng may be null when sigma == 0.
WeightVector sharpen(const WeightVector& w, double gamma, double sigma, Rng* rng,
                     double epsilon_floor = 1e-6);

/// Full step-3..6 pipeline: weights = sharpen(controller_weights(x, one_hot)),
/// output = sum_i weights_i * f_i(x). Function layers see the bare x.
std::pair<Tensor, WeightVector> cfn_forward(CfnModel& model, const Tensor& x,
                                            const Tensor& one_hot, double gamma, double sigma,
                                            Rng* rng);

/// One optimization step on a batch of independent one-step episodes: mean
/// l2_loss backpropagated through the weighted sum, the sharpening transform,
/// the function layers and the controller; rmsprop applied. Returns the loss.
/// mean_weights, when given, receives the batch mean of the sharpened weights.
double cfn_train_step(CfnModel& model, const std::vector<TaskSample>& batch, std::int64_t step,
                      const CfnConfig& cfg, const RmspropConfig& opt, Rng& rng,
                      Tensor* mean_weights = nullptr);

/// Loss of one episode at sigma = 0 with its gradient accumulated into the
/// store (no optimizer step). The finite-difference suite drives this.
double cfn_loss_and_grad(CfnModel& model, const TaskSample& sample, double gamma);

/// Mean L2 norm of the weight vectors: 1/sqrt(F) at uniform, 1.0 at one-hot.
double disentanglement(const std::vector<WeightVector>& weights);

}  // namespace entangle
