#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "entangle/experiment_log.hpp"
#include "entangle/nn.hpp"
#include "entangle/optim.hpp"
#include "entangle/param_store.hpp"
#include "entangle/render.hpp"
#include "entangle/rng.hpp"

namespace entangle {

/// Partition of the latent vector: azimuth, elevation and light azimuth each
/// own one slot, the rest is the intrinsic block.
struct LatentLayout {
  std::size_t total_dim = 16;

  static constexpr std::size_t kAzimuthSlot = 0;
  static constexpr std::size_t kElevationSlot = 1;
  static constexpr std::size_t kLightSlot = 2;
  static constexpr std::size_t kIntrinsicStart = 3;

  std::size_t intrinsic_dim() const { return total_dim - kIntrinsicStart; }
  bool is_extrinsic(std::size_t index) const { return index < kIntrinsicStart; }
};

enum class ActiveTransform : int {
  kAzimuth = 0,
  kElevation = 1,
  kLight = 2,
  kIntrinsic = 3,
};

const std::string& active_transform_name(ActiveTransform t);
/// Latent slot of an extrinsic transform; throws for kIntrinsic.
std::size_t active_slot(ActiveTransform t);

/// Mini-batch in which exactly one scene variable family changes.
struct ClampedBatch {
  std::vector<Tensor> images;  // flattened [side*side]
  ActiveTransform active = ActiveTransform::kAzimuth;
  std::vector<SceneParams> scenes;
  std::vector<double> swept_values;  // active extrinsic values; empty for intrinsic
};

/// One random base scene; the active extrinsic is swept uniformly over its
/// range (batch_size values), or for kIntrinsic the extrinsics stay fixed and
/// batch_size random intrinsic vectors are drawn.
ClampedBatch make_clamped_batch(std::uint64_t seed, ActiveTransform active,
                                std::size_t batch_size, std::size_t side);

struct VaeConfig {
  std::size_t side = 32;
  std::size_t hidden = 256;
  LatentLayout layout;
  std::size_t batch_size = 20;
};

/// MLP variational autoencoder: encoder image -> hidden -> y_e, bias-free
/// heads mu = W_mu y_e and logvar = W_s y_e, decoder z -> hidden -> image with
/// a sigmoid output.
class VaeModel {
 public:
  VaeModel(const VaeConfig& cfg, std::uint64_t seed);

  const VaeConfig& config() const { return cfg_; }
  const LatentLayout& layout() const { return cfg_.layout; }
  std::size_t image_dim() const { return cfg_.side * cfg_.side; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  DenseLayer enc1, enc2, head_mu, head_logvar, dec1, dec2;
  std::string enc1_slope, enc2_slope, dec1_slope;

  double slope(const std::string& name) const { return params_.value(name)[0]; }

 private:
  VaeConfig cfg_;
  ParamStore params_;
};

/// (mu, sigma); sigma = sqrt(exp(logvar)) is strictly positive.
std::pair<Tensor, Tensor> encode(const VaeModel& model, const Tensor& x);
Tensor decode(const VaeModel& model, const Tensor& z);

Tensor reparameterize(const Tensor& mu, const Tensor& sigma, Rng& rng);
/// z = mu + sigma .* eps for a supplied noise vector.
Tensor reparameterize_with(const Tensor& mu, const Tensor& sigma, const Tensor& eps);

/// 0.5*||x - decode(z)||^2 + KL(q(z|x) || N(0, I)).
double vae_loss(const VaeModel& model, const Tensor& x, const Tensor& z);

/// Plain SGVB loss for one sample with the given frozen noise vector, with its
/// gradient accumulated into the store (no clamping, no optimizer step). The
/// finite-difference suite drives this.
double vae_loss_and_grad(VaeModel& model, const Tensor& x, const Tensor& eps);

/// Scale of the difference-from-mean gradient on clamped latents.
inline constexpr double kInvarianceScale = 1.0 / 100.0;

/// Per-index batch mean of the sampled latents, and copies with every
/// non-trained index replaced by that mean.
std::pair<std::vector<Tensor>, Tensor> clamp_latents(const std::vector<Tensor>& z,
                                                     const std::vector<bool>& trained);

/// (z - mean) * kInvarianceScale.
Tensor invariance_gradient(const Tensor& z, const Tensor& mean);

/// Instrumentation captured by clamped_train_step when requested.
struct ClampDiagnostics {
  std::vector<Tensor> z;             // sampled latents per sample
  Tensor latent_mean;                // per-index batch mean of z
  std::vector<Tensor> z_tilde;       // what the decoder received
  std::vector<Tensor> decoder_grad;  // dL/dz_tilde before any replacement
  std::vector<Tensor> applied_grad;  // gradient actually sent into the encoder
};

/// Forward: encode all samples, replace clamped indices of the sampled z with
/// their batch means, decode. Backward: SGVB gradients, except clamped latent
/// indices receive (z_i - mean_i) * kInvarianceScale while the trained indices
/// keep the true backpropagated gradient; KL uses the unclamped (mu, sigma).
/// Applies one rmsprop step and returns the mean per-sample loss.
double clamped_train_step(VaeModel& model, const ClampedBatch& batch, ActiveTransform z_train,
                          const RmspropConfig& opt, Rng& rng,
                          ClampDiagnostics* diag = nullptr);

struct VaeTrainOptions {
  std::int64_t steps = 20000;
  std::uint64_t seed = 0;
  std::array<double, 4> ratio = {1.0, 1.0, 1.0, 10.0};  // azimuth:elevation:light:intrinsic
  std::int64_t log_every = 100;
  std::int64_t eval_every = 2000;
};

/// Draws the active transform per step with probability proportional to the
/// ratio, builds a ClampedBatch and runs clamped_train_step. Logs the loss and,
/// every eval_every steps, per-slot variance diagnostics on fixed eval sweeps.
ExperimentLog train_vae(VaeModel& model, const VaeTrainOptions& options,
                        const RmspropConfig& opt);

/// Per-index variance of mu across the batch.
Tensor latent_mu_variances(const VaeModel& model, const ClampedBatch& batch);
/// Index of the largest mu-variance; ties break toward the lowest index.
std::size_t max_variance_latent(const VaeModel& model, const ClampedBatch& batch);

}  // namespace entangle
