#include "entangle/vae.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace entangle {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const std::string& active_transform_name(ActiveTransform t) {
  static const std::array<std::string, 4> names = {"azimuth", "elevation", "light", "intrinsic"};
  return names[static_cast<int>(t)];
}

std::size_t active_slot(ActiveTransform t) {
  switch (t) {
    case ActiveTransform::kAzimuth: return LatentLayout::kAzimuthSlot;
    case ActiveTransform::kElevation: return LatentLayout::kElevationSlot;
    case ActiveTransform::kLight: return LatentLayout::kLightSlot;
    case ActiveTransform::kIntrinsic: break;
  }
  throw std::invalid_argument("active_slot: intrinsic spans a block, not a single slot");
}

ClampedBatch make_clamped_batch(std::uint64_t seed, ActiveTransform active,
                                std::size_t batch_size, std::size_t side) {
  if (batch_size < 2) throw std::invalid_argument("make_clamped_batch: batch_size must be >= 2");
  Rng rng(seed);
  SceneParams base = random_scene(rng);

  ClampedBatch batch;
  batch.active = active;
  batch.images.reserve(batch_size);
  batch.scenes.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    SceneParams p = base;
    double t = static_cast<double>(k);
    switch (active) {
      case ActiveTransform::kAzimuth:
        p.azimuth = -kPi + 2.0 * kPi * t / static_cast<double>(batch_size);
        batch.swept_values.push_back(p.azimuth);
        break;
      case ActiveTransform::kElevation:
        p.elevation = -kPi / 4.0 + (kPi / 2.0) * t / static_cast<double>(batch_size - 1);
        batch.swept_values.push_back(p.elevation);
        break;
      case ActiveTransform::kLight:
        p.light_azimuth = -kPi + 2.0 * kPi * t / static_cast<double>(batch_size);
        batch.swept_values.push_back(p.light_azimuth);
        break;
      case ActiveTransform::kIntrinsic:
        for (std::size_t i = 0; i < kSceneIntrinsicDim; ++i) p.intrinsic[i] = rng.uniform();
        break;
    }
    batch.images.push_back(flatten(render_sprite(p, side)));
    batch.scenes.push_back(std::move(p));
  }
  return batch;
}

VaeModel::VaeModel(const VaeConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.layout.total_dim < 4)
    throw std::invalid_argument("VaeModel: latent total_dim must be >= 4");
  Rng rng(seed);
  const std::size_t img = image_dim();
  const std::size_t h = cfg.hidden;
  const std::size_t d = cfg.layout.total_dim;
  enc1 = make_dense(params_, "enc1", img, h, rng);
  enc2 = make_dense(params_, "enc2", h, h, rng);
  head_mu = make_dense_no_bias(params_, "head_mu", h, d, rng);
  head_logvar = make_dense_no_bias(params_, "head_logvar", h, d, rng);
  dec1 = make_dense(params_, "dec1", d, h, rng);
  dec2 = make_dense(params_, "dec2", h, img, rng);
  enc1_slope = "enc1.slope";
  enc2_slope = "enc2.slope";
  dec1_slope = "dec1.slope";
  params_.add(enc1_slope, {1})[0] = 0.25;
  params_.add(enc2_slope, {1})[0] = 0.25;
  params_.add(dec1_slope, {1})[0] = 0.25;
}

namespace {

struct EncodeCache {
  Tensor h1_pre, h1, ye_pre, ye, mu, logvar, sigma;
};

struct DecodeCache {
  Tensor d1_pre, d1, logits, xhat;
};

EncodeCache encode_cached(const VaeModel& m, const Tensor& x) {
  EncodeCache c;
  c.h1_pre = dense_forward(m.enc1, x, m.params());
  c.h1 = prelu(c.h1_pre, m.slope(m.enc1_slope));
  c.ye_pre = dense_forward(m.enc2, c.h1, m.params());
  c.ye = prelu(c.ye_pre, m.slope(m.enc2_slope));
  c.mu = dense_forward(m.head_mu, c.ye, m.params());
  c.logvar = dense_forward(m.head_logvar, c.ye, m.params());
  c.sigma = Tensor::zeros(c.logvar.shape());
  for (std::size_t i = 0; i < c.sigma.size(); ++i) c.sigma[i] = std::exp(0.5 * c.logvar[i]);
  return c;
}

DecodeCache decode_cached(const VaeModel& m, const Tensor& z) {
  DecodeCache c;
  c.d1_pre = dense_forward(m.dec1, z, m.params());
  c.d1 = prelu(c.d1_pre, m.slope(m.dec1_slope));
  c.logits = dense_forward(m.dec2, c.d1, m.params());
  c.xhat = Tensor::zeros(c.logits.shape());
  for (std::size_t i = 0; i < c.xhat.size(); ++i) c.xhat[i] = 1.0 / (1.0 + std::exp(-c.logits[i]));
  return c;
}

double reconstruction_loss(const Tensor& x, const Tensor& xhat) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = xhat[i] - x[i];
    s += d * d;
  }
  return 0.5 * s;
}

/// Backward through decoder given dL/dxhat; returns dL/dz.
Tensor decode_backward(VaeModel& m, const Tensor& z, const DecodeCache& c, const Tensor& dxhat) {
  Tensor dlogits = Tensor::zeros(dxhat.shape());
  for (std::size_t i = 0; i < dlogits.size(); ++i)
    dlogits[i] = dxhat[i] * c.xhat[i] * (1.0 - c.xhat[i]);
  Tensor dd1 = dense_backward(m.dec2, c.d1, dlogits, m.params());
  double& ds3 = m.params().grad(m.dec1_slope)[0];
  Tensor dd1_pre = prelu_backward(c.d1_pre, m.slope(m.dec1_slope), dd1, ds3);
  return dense_backward(m.dec1, z, dd1_pre, m.params());
}

/// Backward through the encoder given dL/dmu and dL/dlogvar.
void encode_backward(VaeModel& m, const Tensor& x, const EncodeCache& c, const Tensor& dmu,
                     const Tensor& dlogvar) {
  Tensor dye = dense_backward(m.head_mu, c.ye, dmu, m.params());
  Tensor dye2 = dense_backward(m.head_logvar, c.ye, dlogvar, m.params());
  for (std::size_t i = 0; i < dye.size(); ++i) dye[i] += dye2[i];
  double& ds2 = m.params().grad(m.enc2_slope)[0];
  Tensor dye_pre = prelu_backward(c.ye_pre, m.slope(m.enc2_slope), dye, ds2);
  Tensor dh1 = dense_backward(m.enc2, c.h1, dye_pre, m.params());
  double& ds1 = m.params().grad(m.enc1_slope)[0];
  Tensor dh1_pre = prelu_backward(c.h1_pre, m.slope(m.enc1_slope), dh1, ds1);
  dense_backward(m.enc1, x, dh1_pre, m.params());
}

}  // namespace

std::pair<Tensor, Tensor> encode(const VaeModel& model, const Tensor& x) {
  require_vector(x, model.image_dim(), "encode");
  EncodeCache c = encode_cached(model, x);
  return {c.mu, c.sigma};
}

Tensor decode(const VaeModel& model, const Tensor& z) {
  require_vector(z, model.layout().total_dim, "decode");
  return decode_cached(model, z).xhat;
}

Tensor reparameterize(const Tensor& mu, const Tensor& sigma, Rng& rng) {
  Tensor eps = Tensor::zeros(mu.shape());
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return reparameterize_with(mu, sigma, eps);
}

Tensor reparameterize_with(const Tensor& mu, const Tensor& sigma, const Tensor& eps) {
  require_same_shape(mu, sigma, "reparameterize");
  require_same_shape(mu, eps, "reparameterize");
  Tensor z = Tensor::zeros(mu.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (sigma[i] <= 0.0) throw std::domain_error("reparameterize: sigma must be positive");
    z[i] = mu[i] + sigma[i] * eps[i];
  }
  return z;
}

double vae_loss(const VaeModel& model, const Tensor& x, const Tensor& z) {
  auto [mu, sigma] = encode(model, x);
  Tensor xhat = decode(model, z);
  return reconstruction_loss(x, xhat) + gaussian_kl_to_standard(mu, sigma);
}

double vae_loss_and_grad(VaeModel& model, const Tensor& x, const Tensor& eps) {
  EncodeCache enc = encode_cached(model, x);
  Tensor z = reparameterize_with(enc.mu, enc.sigma, eps);
  DecodeCache dec = decode_cached(model, z);
  double loss =
      reconstruction_loss(x, dec.xhat) + gaussian_kl_to_standard(enc.mu, enc.sigma);

  Tensor dxhat = Tensor::zeros(dec.xhat.shape());
  for (std::size_t i = 0; i < dxhat.size(); ++i) dxhat[i] = dec.xhat[i] - x[i];
  Tensor dz = decode_backward(model, z, dec, dxhat);

  const std::size_t D = model.layout().total_dim;
  Tensor dmu = Tensor::zeros({D}), dlogvar = Tensor::zeros({D});
  for (std::size_t i = 0; i < D; ++i) {
    dmu[i] = dz[i] + enc.mu[i];
    dlogvar[i] = dz[i] * 0.5 * enc.sigma[i] * eps[i] +
                 0.5 * (enc.sigma[i] * enc.sigma[i] - 1.0);
  }
  encode_backward(model, x, enc, dmu, dlogvar);
  return loss;
}

std::pair<std::vector<Tensor>, Tensor> clamp_latents(const std::vector<Tensor>& z,
                                                     const std::vector<bool>& trained) {
  if (z.empty()) throw std::invalid_argument("clamp_latents: empty batch");
  const std::size_t D = z.front().size();
  if (trained.size() != D)
    throw std::invalid_argument("clamp_latents: mask size does not match latent size");
  Tensor mean = Tensor::zeros({D});
  for (const Tensor& zk : z)
    for (std::size_t i = 0; i < D; ++i) mean[i] += zk[i];
  for (std::size_t i = 0; i < D; ++i) mean[i] /= static_cast<double>(z.size());

  std::vector<Tensor> out = z;
  for (Tensor& zk : out)
    for (std::size_t i = 0; i < D; ++i)
      if (!trained[i]) zk[i] = mean[i];
  return {std::move(out), std::move(mean)};
}

Tensor invariance_gradient(const Tensor& z, const Tensor& mean) {
  require_same_shape(z, mean, "invariance_gradient");
  Tensor g = Tensor::zeros(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) g[i] = kInvarianceScale * (z[i] - mean[i]);
  return g;
}

double clamped_train_step(VaeModel& model, const ClampedBatch& batch, ActiveTransform z_train,
                          const RmspropConfig& opt, Rng& rng, ClampDiagnostics* diag) {
  if (batch.images.empty()) throw std::invalid_argument("clamped_train_step: empty batch");
  if (batch.active != z_train)
    throw std::invalid_argument("clamped_train_step: z_train does not match batch.active");

  const LatentLayout& layout = model.layout();
  const std::size_t D = layout.total_dim;
  const std::size_t B = batch.images.size();

  // Index sets: for an extrinsic transform one slot trains; for intrinsic the
  // whole intrinsic block trains and the three extrinsic slots are clamped.
  std::vector<bool> trained(D, false);
  if (z_train == ActiveTransform::kIntrinsic) {
    for (std::size_t i = LatentLayout::kIntrinsicStart; i < D; ++i) trained[i] = true;
  } else {
    trained[active_slot(z_train)] = true;
  }

  std::vector<EncodeCache> enc(B);
  std::vector<Tensor> eps(B), z(B);
  for (std::size_t k = 0; k < B; ++k) {
    enc[k] = encode_cached(model, batch.images[k]);
    eps[k] = Tensor::zeros({D});
    for (std::size_t i = 0; i < D; ++i) eps[k][i] = rng.normal();
    z[k] = reparameterize_with(enc[k].mu, enc[k].sigma, eps[k]);
  }
  auto [z_tilde, mean] = clamp_latents(z, trained);

  if (diag) {
    diag->z = z;
    diag->latent_mean = mean;
    diag->z_tilde.clear();
    diag->decoder_grad.clear();
    diag->applied_grad.clear();
  }

  double total_loss = 0.0;
  for (std::size_t k = 0; k < B; ++k) {
    const Tensor& ztilde = z_tilde[k];
    DecodeCache dec = decode_cached(model, ztilde);
    total_loss += reconstruction_loss(batch.images[k], dec.xhat) +
                  gaussian_kl_to_standard(enc[k].mu, enc[k].sigma);

    Tensor dxhat = Tensor::zeros(dec.xhat.shape());
    for (std::size_t i = 0; i < dxhat.size(); ++i) dxhat[i] = dec.xhat[i] - batch.images[k][i];
    Tensor dztilde = decode_backward(model, ztilde, dec, dxhat);

    Tensor invariance = invariance_gradient(z[k], mean);
    Tensor dz = Tensor::zeros({D});
    for (std::size_t i = 0; i < D; ++i) dz[i] = trained[i] ? dztilde[i] : invariance[i];

    if (diag) {
      diag->z_tilde.push_back(ztilde);
      diag->decoder_grad.push_back(dztilde);
      diag->applied_grad.push_back(dz);
    }

    // Through the reparameterization, plus the KL term on the unclamped (mu, sigma).
    Tensor dmu = Tensor::zeros({D}), dlogvar = Tensor::zeros({D});
    for (std::size_t i = 0; i < D; ++i) {
      dmu[i] = dz[i] + enc[k].mu[i];
      dlogvar[i] = dz[i] * 0.5 * enc[k].sigma[i] * eps[k][i] +
                   0.5 * (enc[k].sigma[i] * enc[k].sigma[i] - 1.0);
    }
    encode_backward(model, batch.images[k], enc[k], dmu, dlogvar);
  }

  rmsprop_step(model.params(), opt);
  return total_loss / static_cast<double>(B);
}

ExperimentLog train_vae(VaeModel& model, const VaeTrainOptions& options,
                        const RmspropConfig& opt) {
  ExperimentLog log;
  Rng rng(options.seed);
  double ratio_sum =
      options.ratio[0] + options.ratio[1] + options.ratio[2] + options.ratio[3];
  if (ratio_sum <= 0.0) throw std::invalid_argument("train_vae: ratio must have positive mass");

  const std::size_t side = model.config().side;
  const std::size_t B = model.config().batch_size;

  // Fixed sweeps reused at every evaluation point.
  std::array<ClampedBatch, 3> eval_batches = {
      make_clamped_batch(options.seed ^ 0xe5a1u, ActiveTransform::kAzimuth, B, side),
      make_clamped_batch(options.seed ^ 0xe5a2u, ActiveTransform::kElevation, B, side),
      make_clamped_batch(options.seed ^ 0xe5a3u, ActiveTransform::kLight, B, side)};

  auto log_diagnostics = [&](std::int64_t step) {
    for (const auto& eb : eval_batches) {
      Tensor var = latent_mu_variances(model, eb);
      std::size_t slot = active_slot(eb.active);
      double others = 0.0;
      for (std::size_t i = 0; i < var.size(); ++i)
        if (i != slot) others += var[i];
      others /= static_cast<double>(var.size() - 1);
      const std::string& name = active_transform_name(eb.active);
      log.add(step, "var_" + name + "_slot", var[slot]);
      log.add(step, "var_" + name + "_ratio", others > 0.0 ? var[slot] / others : 0.0);
      log.add(step, "maxvar_" + name,
              static_cast<double>(max_variance_latent(model, eb)));
    }
  };

  for (std::int64_t step = 0; step < options.steps; ++step) {
    double pick = rng.uniform(0.0, ratio_sum);
    ActiveTransform active = ActiveTransform::kIntrinsic;
    double acc = 0.0;
    for (int t = 0; t < 4; ++t) {
      acc += options.ratio[static_cast<std::size_t>(t)];
      if (pick < acc) {
        active = static_cast<ActiveTransform>(t);
        break;
      }
    }
    ClampedBatch batch = make_clamped_batch(rng.fork_seed(), active, B, side);
    double loss = clamped_train_step(model, batch, active, opt, rng);
    if (step % options.log_every == 0 || step + 1 == options.steps)
      log.add(step, "loss", loss);
    if (options.eval_every > 0 &&
        (step % options.eval_every == 0 || step + 1 == options.steps))
      log_diagnostics(step);
  }
  return log;
}

Tensor latent_mu_variances(const VaeModel& model, const ClampedBatch& batch) {
  if (batch.images.empty())
    throw std::invalid_argument("latent_mu_variances: empty batch");
  const std::size_t D = model.layout().total_dim;
  const std::size_t B = batch.images.size();
  std::vector<Tensor> mus;
  mus.reserve(B);
  Tensor mean = Tensor::zeros({D});
  for (const Tensor& x : batch.images) {
    Tensor mu = encode(model, x).first;
    for (std::size_t i = 0; i < D; ++i) mean[i] += mu[i];
    mus.push_back(std::move(mu));
  }
  for (std::size_t i = 0; i < D; ++i) mean[i] /= static_cast<double>(B);
  Tensor var = Tensor::zeros({D});
  for (const Tensor& mu : mus)
    for (std::size_t i = 0; i < D; ++i) {
      double d = mu[i] - mean[i];
      var[i] += d * d;
    }
  for (std::size_t i = 0; i < D; ++i) var[i] /= static_cast<double>(B);
  return var;
}

std::size_t max_variance_latent(const VaeModel& model, const ClampedBatch& batch) {
  Tensor var = latent_mu_variances(model, batch);
  std::size_t best = 0;
  for (std::size_t i = 1; i < var.size(); ++i)
    if (var[i] > var[best]) best = i;
  return best;
}

}  // namespace entangle
