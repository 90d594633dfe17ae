#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "entangle/cfn.hpp"
#include "entangle/experiment_log.hpp"
#include "entangle/optim.hpp"
#include "entangle/taskdata.hpp"

namespace entangle {

/// Parameter-matched feedforward comparison model: dense 18 -> 100 -> 100 -> 10
/// with a scalar PReLU after each linear map. 13013 parameters at the default
/// widths (1900 + 10100 + 1010 + 3).
class FfnBaseline {
 public:
  FfnBaseline(std::size_t input_dim, std::size_t num_tasks, std::uint64_t seed,
              std::size_t hidden = 100);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_tasks() const { return num_tasks_; }

  DenseLayer l1, l2, l3;
  std::string s1, s2, s3;

 private:
  std::size_t input_dim_;
  std::size_t num_tasks_;
  ParamStore params_;
};

/// dense -> prelu three times on concat(x, one_hot).
Tensor ffn_forward(const FfnBaseline& model, const Tensor& x, const Tensor& one_hot);

/// Loss of one sample with gradients scaled by `scale` accumulated in place.
double ffn_loss_and_grad(FfnBaseline& model, const TaskSample& sample, double scale);

/// Mean-l2 batch step with rmsprop applied; returns the loss.
double ffn_train_step(FfnBaseline& model, const std::vector<TaskSample>& batch,
                      const RmspropConfig& opt);

/// Total scalar count across store entries.
std::size_t count_params(const ParamStore& store);

/// Fixed-seed validation sets, one per primitive.
std::vector<std::vector<TaskSample>> make_validation_sets(std::uint64_t seed, std::size_t dim,
                                                          std::size_t per_task);

/// Deterministic evaluation pass (sigma = 0, weights sharpened at gamma).
double cfn_validation_loss(CfnModel& model, const std::vector<TaskSample>& samples, double gamma);
double ffn_validation_loss(const FfnBaseline& model, const std::vector<TaskSample>& samples);

struct DisentanglementOptions {
  std::int64_t steps = 24000;
  std::uint64_t seed = 1;
  bool with_sharpening = true;
  std::int64_t eval_every = 1000;
  std::size_t batch_size = 20;
  std::size_t val_per_task = 256;
};

/// Trains a CFN on the mixed 8-primitive stream and logs validation loss and
/// disentanglement. with_sharpening = false fixes gamma = 1 and sigma = 0.
/// The trained model is written to *model_out when provided.
ExperimentLog run_disentanglement_experiment(const CfnConfig& cfg,
                                             const DisentanglementOptions& options,
                                             const RmspropConfig& opt,
                                             CfnModel* model_out = nullptr);

struct ForgettingOptions {
  std::uint64_t seed = 1;
  std::size_t dim = 10;
  std::size_t batch_size = 20;
  std::int64_t pretrain_max_steps = 60000;
  std::int64_t pretrain_gamma_ramp_steps = 16000;
  double pretrain_threshold = 0.01;
  std::int64_t pretrain_check_every = 1000;
  std::int64_t retrain_steps = 5000;
  std::int64_t eval_every = 100;
  std::size_t val_per_task = 1024;
};

struct PretrainedModels {
  CfnModel cfn;
  FfnBaseline ffn;
  double cfn_gamma = 100.0;  // schedule endpoint; retraining continues here
  std::int64_t pretrain_steps_used = 0;
};

/// Joint pre-training on all eight primitives until mean validation L2 drops
/// below the threshold for both models (after the gamma ramp completes for the
/// CFN). Throws std::runtime_error with a diagnostic if either model fails to
/// converge within pretrain_max_steps.
PretrainedModels pretrain_for_forgetting(const CfnConfig& cfg, const ForgettingOptions& options,
                                         const RmspropConfig& opt);

struct ForgettingReport {
  PrimitiveId retrain_task;
  std::vector<std::pair<std::int64_t, double>> curve;  // (step, other-task mean L2)
  double mean_off_task_weight = 0.0;                   // CFN instrumentation; 0 for the FFN
};

/// Retrains copies of both models on retrain_task only, with identical
/// hyperparameters and identical batch streams, evaluating mean L2 on held-out
/// validation data of the other seven tasks. Returns (ffn, cfn) reports.
std::pair<ForgettingReport, ForgettingReport> run_forgetting_experiment(
    const PretrainedModels& pretrained, PrimitiveId retrain_task,
    const ForgettingOptions& options, const RmspropConfig& opt);

struct GradSuiteEntry {
  std::string component;
  double max_rel_error;
};

/// Finite-difference check of every trainable component on small seed-fixed
/// instances: dense, prelu, lstm, softmax head, VAE with frozen noise, CFN
/// end-to-end at sigma = 0, and the FFN baseline.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed);

}  // namespace entangle
