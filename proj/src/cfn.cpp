#include "entangle/cfn.hpp"

#include <cmath>
#include <stdexcept>

namespace entangle {

namespace {

struct SharpenCache {
  Tensor base;          // noised weights after the epsilon floor
  Tensor w_sharp;
  std::vector<bool> clipped;
};

WeightVector sharpen_impl(const WeightVector& w, double gamma, double sigma, Rng* rng,
                          double epsilon_floor, SharpenCache* cache) {
  if (gamma < 1.0) throw std::invalid_argument("sharpen: gamma must be >= 1");
  if (sigma < 0.0) throw std::invalid_argument("sharpen: sigma must be >= 0");
  if (epsilon_floor <= 0.0) throw std::invalid_argument("sharpen: epsilon_floor must be > 0");
  if (sigma > 0.0 && rng == nullptr)
    throw std::invalid_argument("sharpen: sigma > 0 requires a noise source");

  const std::size_t n = w.w.size();
  Tensor base = Tensor::zeros({n});
  std::vector<bool> clipped(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    double v = w.w[i] + (sigma > 0.0 ? sigma * rng->normal() : 0.0);
    if (v < epsilon_floor) {
      v = epsilon_floor;
      clipped[i] = true;
    }
    base[i] = v;
  }

  Tensor out = Tensor::zeros({n});
  if (gamma == 1.0) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += base[i];
    for (std::size_t i = 0; i < n; ++i) out[i] = base[i] / sum;
  } else {
    // exp(gamma * ln b) with max-subtraction so large gamma cannot overflow.
    Tensor t = Tensor::zeros({n});
    double m = -1e300;
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = gamma * std::log(base[i]);
      m = std::max(m, t[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = std::exp(t[i] - m);
      sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
  }

  if (cache) {
    cache->base = base;
    cache->w_sharp = out;
    cache->clipped = std::move(clipped);
  }
  return WeightVector{out};
}

/// d(loss)/d(raw w) given d(loss)/d(sharpened w). Noise is a constant of the
/// draw; entries whose noised value hit the floor get zero gradient.
Tensor sharpen_backward(const SharpenCache& cache, double gamma, const Tensor& dw_sharp) {
  const std::size_t n = cache.w_sharp.size();
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += dw_sharp[i] * cache.w_sharp[i];
  Tensor dw = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    if (cache.clipped[i]) continue;
    dw[i] = gamma * cache.w_sharp[i] * (dw_sharp[i] - dot) / cache.base[i];
  }
  return dw;
}

}  // namespace

Schedule default_gamma_schedule(std::int64_t total_steps) {
  std::int64_t ramp_end = std::max<std::int64_t>(1, (total_steps * 8) / 10);
  return Schedule::linear_ramp(1.0, 100.0, 0, ramp_end);
}

CfnModel::CfnModel(const CfnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.num_functions < 1) throw std::invalid_argument("CfnModel: num_functions must be >= 1");
  Rng rng(seed);
  controller_ = make_lstm(params_, "ctrl.lstm", cfg.input_dim + cfg.num_tasks,
                          cfg.controller_hidden, rng);
  head_ = make_dense(params_, "ctrl.head", cfg.controller_hidden, cfg.num_functions, rng);
  for (std::size_t i = 0; i < cfg.num_functions; ++i) {
    std::string prefix = "fn" + std::to_string(i);
    FunctionLayer fl;
    fl.dense = make_dense(params_, prefix, cfg.input_dim, cfg.input_dim, rng);
    fl.slope_name = prefix + ".slope";
    params_.add(fl.slope_name, {1})[0] = 0.25;
    functions_.push_back(std::move(fl));
  }
}

double CfnModel::function_slope(std::size_t i) const {
  return params_.value(functions_[i].slope_name)[0];
}

WeightVector controller_weights(CfnModel& model, const Tensor& x, const Tensor& one_hot) {
  require_vector(x, model.config().input_dim, "controller_weights");
  require_vector(one_hot, model.config().num_tasks, "controller_weights");
  Tensor h = lstm_step(model.controller(), concat(x, one_hot), model.params());
  Tensor logits = dense_forward(model.head(), h, model.params());
  return WeightVector{softmax(logits)};
}

Tensor function_output(const CfnModel& model, std::size_t i, const Tensor& x) {
  const FunctionLayer& fl = model.functions().at(i);
  return prelu(dense_forward(fl.dense, x, model.params()), model.function_slope(i));
}

Tensor cfn_combine(const CfnModel& model, const Tensor& x, const Tensor& weights) {
  if (weights.size() != model.functions().size())
    throw std::invalid_argument("cfn_combine: weight count does not match function count");
  Tensor out = Tensor::zeros({model.config().input_dim});
  for (std::size_t i = 0; i < model.functions().size(); ++i) {
    Tensor fi = function_output(model, i, x);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += weights[i] * fi[j];
  }
  return out;
}

WeightVector sharpen(const WeightVector& w, double gamma, double sigma, Rng* rng,
                     double epsilon_floor) {
  return sharpen_impl(w, gamma, sigma, rng, epsilon_floor, nullptr);
}

std::pair<Tensor, WeightVector> cfn_forward(CfnModel& model, const Tensor& x,
                                            const Tensor& one_hot, double gamma, double sigma,
                                            Rng* rng) {
  WeightVector raw = controller_weights(model, x, one_hot);
  WeightVector sharp = sharpen(raw, gamma, sigma, rng, model.config().epsilon_floor);
  return {cfn_combine(model, x, sharp.w), sharp};
}

namespace {

/// Loss of one episode with gradients scaled by `scale` accumulated in place.
/// Returns the unscaled sample loss; writes the sharpened weights if asked.
double sample_loss_and_grad(CfnModel& model, const TaskSample& sample, double gamma, double sigma,
                            Rng* rng, double scale, Tensor* weights_out) {
  const CfnConfig& cfg = model.config();
  const std::size_t F = model.functions().size();
  ParamStore& params = model.params();

  // Each sample is an independent one-step episode.
  model.reset_controller();
  LstmStepCache lstm_cache;
  Tensor ctrl_in = concat(sample.input, sample.one_hot);
  Tensor h = lstm_step(model.controller(), ctrl_in, params, &lstm_cache);
  Tensor logits = dense_forward(model.head(), h, params);
  Tensor w_raw = softmax(logits);

  SharpenCache sharpen_cache;
  sharpen_impl(WeightVector{w_raw}, gamma, sigma, rng, cfg.epsilon_floor, &sharpen_cache);
  const Tensor& w_sharp = sharpen_cache.w_sharp;
  if (weights_out) *weights_out = w_sharp;

  std::vector<Tensor> pre(F), f(F);
  Tensor out = Tensor::zeros({cfg.input_dim});
  for (std::size_t i = 0; i < F; ++i) {
    pre[i] = dense_forward(model.functions()[i].dense, sample.input, params);
    f[i] = prelu(pre[i], model.function_slope(i));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w_sharp[i] * f[i][j];
  }
  double loss = l2_loss(out, sample.target);

  Tensor dout = l2_loss_backward(out, sample.target);
  for (std::size_t j = 0; j < dout.size(); ++j) dout[j] *= scale;

  Tensor dw_sharp = Tensor::zeros({F});
  for (std::size_t i = 0; i < F; ++i) {
    for (std::size_t j = 0; j < dout.size(); ++j) dw_sharp[i] += dout[j] * f[i][j];
    Tensor df = Tensor::zeros(dout.shape());
    for (std::size_t j = 0; j < dout.size(); ++j) df[j] = dout[j] * w_sharp[i];
    double& slope_grad = params.grad(model.functions()[i].slope_name)[0];
    Tensor dpre = prelu_backward(pre[i], model.function_slope(i), df, slope_grad);
    dense_backward(model.functions()[i].dense, sample.input, dpre, params);
  }

  Tensor dw_raw = sharpen_backward(sharpen_cache, gamma, dw_sharp);
  Tensor dlogits = softmax_backward(w_raw, dw_raw);
  Tensor dh = dense_backward(model.head(), h, dlogits, params);
  lstm_step_backward(model.controller(), lstm_cache, dh, Tensor(), params, nullptr, nullptr,
                     nullptr);
  return loss;
}

}  // namespace

double cfn_train_step(CfnModel& model, const std::vector<TaskSample>& batch, std::int64_t step,
                      const CfnConfig& cfg, const RmspropConfig& opt, Rng& rng,
                      Tensor* mean_weights) {
  if (batch.empty()) throw std::invalid_argument("cfn_train_step: empty batch");
  const double gamma = schedule_value(cfg.sharpen_gamma, step);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  if (mean_weights) *mean_weights = Tensor::zeros({model.functions().size()});

  double total_loss = 0.0;
  for (const TaskSample& sample : batch) {
    Tensor w;
    total_loss += sample_loss_and_grad(model, sample, gamma, cfg.noise_sigma, &rng, inv_batch,
                                       mean_weights ? &w : nullptr);
    if (mean_weights)
      for (std::size_t i = 0; i < w.size(); ++i) (*mean_weights)[i] += inv_batch * w[i];
  }

  rmsprop_step(model.params(), opt);
  return total_loss * inv_batch;
}

double cfn_loss_and_grad(CfnModel& model, const TaskSample& sample, double gamma) {
  return sample_loss_and_grad(model, sample, gamma, 0.0, nullptr, 1.0, nullptr);
}

double disentanglement(const std::vector<WeightVector>& weights) {
  if (weights.empty()) throw std::invalid_argument("disentanglement: empty weight list");
  double sum = 0.0;
  for (const auto& wv : weights) {
    double sq = 0.0;
    for (std::size_t i = 0; i < wv.w.size(); ++i) sq += wv.w[i] * wv.w[i];
    sum += std::sqrt(sq);
  }
  return sum / static_cast<double>(weights.size());
}

}  // namespace entangle
