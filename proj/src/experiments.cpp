#include "entangle/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "entangle/grad_check.hpp"
#include "entangle/render.hpp"
#include "entangle/vae.hpp"

namespace entangle {

FfnBaseline::FfnBaseline(std::size_t input_dim, std::size_t num_tasks, std::uint64_t seed,
                         std::size_t hidden)
    : input_dim_(input_dim), num_tasks_(num_tasks) {
  Rng rng(seed);
  const std::size_t in = input_dim + num_tasks;
  l1 = make_dense(params_, "ffn1", in, hidden, rng);
  l2 = make_dense(params_, "ffn2", hidden, hidden, rng);
  l3 = make_dense(params_, "ffn3", hidden, input_dim, rng);
  s1 = "ffn1.slope";
  s2 = "ffn2.slope";
  s3 = "ffn3.slope";
  params_.add(s1, {1})[0] = 0.25;
  params_.add(s2, {1})[0] = 0.25;
  params_.add(s3, {1})[0] = 0.25;
}

Tensor ffn_forward(const FfnBaseline& model, const Tensor& x, const Tensor& one_hot) {
  Tensor in = concat(x, one_hot);
  require_vector(in, model.l1.in_dim, "ffn_forward");
  Tensor h1 = prelu(dense_forward(model.l1, in, model.params()), model.params().value(model.s1)[0]);
  Tensor h2 = prelu(dense_forward(model.l2, h1, model.params()), model.params().value(model.s2)[0]);
  return prelu(dense_forward(model.l3, h2, model.params()), model.params().value(model.s3)[0]);
}

double ffn_loss_and_grad(FfnBaseline& model, const TaskSample& sample, double scale) {
  ParamStore& params = model.params();
  Tensor in = concat(sample.input, sample.one_hot);
  double a1 = params.value(model.s1)[0], a2 = params.value(model.s2)[0],
         a3 = params.value(model.s3)[0];
  Tensor z1 = dense_forward(model.l1, in, params);
  Tensor h1 = prelu(z1, a1);
  Tensor z2 = dense_forward(model.l2, h1, params);
  Tensor h2 = prelu(z2, a2);
  Tensor z3 = dense_forward(model.l3, h2, params);
  Tensor y = prelu(z3, a3);
  double loss = l2_loss(y, sample.target);

  Tensor dy = l2_loss_backward(y, sample.target);
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= scale;
  Tensor dz3 = prelu_backward(z3, a3, dy, params.grad(model.s3)[0]);
  Tensor dh2 = dense_backward(model.l3, h2, dz3, params);
  Tensor dz2 = prelu_backward(z2, a2, dh2, params.grad(model.s2)[0]);
  Tensor dh1 = dense_backward(model.l2, h1, dz2, params);
  Tensor dz1 = prelu_backward(z1, a1, dh1, params.grad(model.s1)[0]);
  dense_backward(model.l1, in, dz1, params);
  return loss;
}

double ffn_train_step(FfnBaseline& model, const std::vector<TaskSample>& batch,
                      const RmspropConfig& opt) {
  if (batch.empty()) throw std::invalid_argument("ffn_train_step: empty batch");
  double inv_batch = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const TaskSample& s : batch) total += ffn_loss_and_grad(model, s, inv_batch);
  rmsprop_step(model.params(), opt);
  return total * inv_batch;
}

std::size_t count_params(const ParamStore& store) { return store.param_count(); }

std::vector<std::vector<TaskSample>> make_validation_sets(std::uint64_t seed, std::size_t dim,
                                                          std::size_t per_task) {
  std::vector<std::vector<TaskSample>> sets;
  sets.reserve(kNumPrimitives);
  for (int t = 0; t < kNumPrimitives; ++t)
    sets.push_back(sample_batch(seed + static_cast<std::uint64_t>(t), dim, per_task,
                                static_cast<PrimitiveId>(t)));
  return sets;
}

double cfn_validation_loss(CfnModel& model, const std::vector<TaskSample>& samples, double gamma) {
  double total = 0.0;
  for (const TaskSample& s : samples) {
    model.reset_controller();
    auto [out, w] = cfn_forward(model, s.input, s.one_hot, gamma, 0.0, nullptr);
    total += l2_loss(out, s.target);
  }
  return total / static_cast<double>(samples.size());
}

double ffn_validation_loss(const FfnBaseline& model, const std::vector<TaskSample>& samples) {
  double total = 0.0;
  for (const TaskSample& s : samples) total += l2_loss(ffn_forward(model, s.input, s.one_hot), s.target);
  return total / static_cast<double>(samples.size());
}

namespace {

double mean_validation_loss_cfn(CfnModel& model, const std::vector<std::vector<TaskSample>>& sets,
                                double gamma) {
  double total = 0.0;
  for (const auto& set : sets) total += cfn_validation_loss(model, set, gamma);
  return total / static_cast<double>(sets.size());
}

double mean_validation_loss_ffn(const FfnBaseline& model,
                                const std::vector<std::vector<TaskSample>>& sets) {
  double total = 0.0;
  for (const auto& set : sets) total += ffn_validation_loss(model, set);
  return total / static_cast<double>(sets.size());
}

double cfn_validation_disentanglement(CfnModel& model,
                                      const std::vector<std::vector<TaskSample>>& sets,
                                      double gamma) {
  std::vector<WeightVector> weights;
  for (const auto& set : sets)
    for (const TaskSample& s : set) {
      model.reset_controller();
      WeightVector raw = controller_weights(model, s.input, s.one_hot);
      weights.push_back(sharpen(raw, gamma, 0.0, nullptr, model.config().epsilon_floor));
    }
  return disentanglement(weights);
}

/// Loss of always predicting the per-coordinate mean target of the mixed set.
double constant_predictor_loss(const std::vector<std::vector<TaskSample>>& sets,
                               std::size_t dim) {
  Tensor mean = Tensor::zeros({dim});
  std::size_t n = 0;
  for (const auto& set : sets)
    for (const TaskSample& s : set) {
      for (std::size_t i = 0; i < dim; ++i) mean[i] += s.target[i];
      ++n;
    }
  for (std::size_t i = 0; i < dim; ++i) mean[i] /= static_cast<double>(n);
  double total = 0.0;
  for (const auto& set : sets)
    for (const TaskSample& s : set) total += l2_loss(mean, s.target);
  return total / static_cast<double>(n);
}

}  // namespace

ExperimentLog run_disentanglement_experiment(const CfnConfig& cfg,
                                             const DisentanglementOptions& options,
                                             const RmspropConfig& opt, CfnModel* model_out) {
  CfnConfig run_cfg = cfg;
  if (!options.with_sharpening) {
    run_cfg.sharpen_gamma = Schedule::constant(1.0);
    run_cfg.noise_sigma = 0.0;
  }

  CfnModel model(run_cfg, options.seed);
  Rng noise_rng(options.seed ^ 0x5eedf00dULL);
  Rng batch_rng(options.seed ^ 0xba7c4e5dULL);
  auto val_sets =
      make_validation_sets(options.seed ^ 0x7a11U, run_cfg.input_dim, options.val_per_task);

  ExperimentLog log;
  log.add(0, "param_count", static_cast<double>(count_params(model.params())));
  log.add(0, "baseline_loss", constant_predictor_loss(val_sets, run_cfg.input_dim));

  for (std::int64_t step = 0; step < options.steps; ++step) {
    auto batch = sample_batch(batch_rng.fork_seed(), run_cfg.input_dim, options.batch_size);
    double loss = cfn_train_step(model, batch, step, run_cfg, opt, noise_rng);
    bool last = step + 1 == options.steps;
    if (step % options.eval_every == 0 || last) {
      double gamma = schedule_value(run_cfg.sharpen_gamma, step);
      log.add(step, "train_loss", loss);
      log.add(step, "gamma", gamma);
      log.add(step, "val_loss", mean_validation_loss_cfn(model, val_sets, gamma));
      log.add(step, "disentanglement", cfn_validation_disentanglement(model, val_sets, gamma));
    }
  }
  if (model_out) *model_out = model;
  return log;
}

PretrainedModels pretrain_for_forgetting(const CfnConfig& cfg, const ForgettingOptions& options,
                                         const RmspropConfig& opt) {
  CfnConfig cfn_cfg = cfg;
  cfn_cfg.input_dim = options.dim;
  cfn_cfg.sharpen_gamma = Schedule::linear_ramp(1.0, 100.0, 0, options.pretrain_gamma_ramp_steps);

  CfnModel cfn(cfn_cfg, options.seed);
  FfnBaseline ffn(options.dim, cfn_cfg.num_tasks, options.seed ^ 0xffbaU);
  Rng noise_rng(options.seed ^ 0x5eedf00dULL);
  Rng batch_rng(options.seed ^ 0x9e7ba7c4ULL);
  auto val_sets = make_validation_sets(options.seed ^ 0x7a11U, options.dim, options.val_per_task);
  const double gamma_end = 100.0;

  bool cfn_ok = false, ffn_ok = false;
  std::int64_t step = 0;
  double cfn_val = 0.0, ffn_val = 0.0;
  for (; step < options.pretrain_max_steps; ++step) {
    auto batch = sample_batch(batch_rng.fork_seed(), options.dim, options.batch_size);
    cfn_train_step(cfn, batch, step, cfn_cfg, opt, noise_rng);
    ffn_train_step(ffn, batch, opt);
    if ((step + 1) % options.pretrain_check_every == 0 &&
        step + 1 >= options.pretrain_gamma_ramp_steps) {
      cfn_val = mean_validation_loss_cfn(cfn, val_sets, gamma_end);
      ffn_val = mean_validation_loss_ffn(ffn, val_sets);
      cfn_ok = cfn_val <= options.pretrain_threshold;
      ffn_ok = ffn_val <= options.pretrain_threshold;
      if (cfn_ok && ffn_ok) break;
    }
  }
  if (!cfn_ok || !ffn_ok) {
    std::ostringstream os;
    os << "pretrain_for_forgetting: no convergence after " << options.pretrain_max_steps
       << " steps (threshold " << options.pretrain_threshold << "; cfn " << cfn_val << ", ffn "
       << ffn_val << ")";
    throw std::runtime_error(os.str());
  }
  return PretrainedModels{std::move(cfn), std::move(ffn), gamma_end, step + 1};
}

namespace {

std::size_t assigned_function(CfnModel& model, const std::vector<TaskSample>& task_samples,
                              double gamma) {
  std::vector<std::size_t> votes(model.functions().size(), 0);
  for (const TaskSample& s : task_samples) {
    model.reset_controller();
    WeightVector w = sharpen(controller_weights(model, s.input, s.one_hot), gamma, 0.0, nullptr,
                             model.config().epsilon_floor);
    std::size_t best = 0;
    for (std::size_t i = 1; i < w.w.size(); ++i)
      if (w.w[i] > w.w[best]) best = i;
    ++votes[best];
  }
  return static_cast<std::size_t>(
      std::max_element(votes.begin(), votes.end()) - votes.begin());
}

}  // namespace

std::pair<ForgettingReport, ForgettingReport> run_forgetting_experiment(
    const PretrainedModels& pretrained, PrimitiveId retrain_task,
    const ForgettingOptions& options, const RmspropConfig& opt) {
  CfnModel cfn = pretrained.cfn;
  FfnBaseline ffn = pretrained.ffn;
  CfnConfig retrain_cfg = cfn.config();
  retrain_cfg.sharpen_gamma = Schedule::constant(pretrained.cfn_gamma);

  auto val_sets = make_validation_sets(options.seed ^ 0x7a11U, options.dim, options.val_per_task);
  std::vector<TaskSample> other_val;
  for (int t = 0; t < kNumPrimitives; ++t)
    if (static_cast<PrimitiveId>(t) != retrain_task)
      other_val.insert(other_val.end(), val_sets[static_cast<std::size_t>(t)].begin(),
                       val_sets[static_cast<std::size_t>(t)].end());

  std::size_t own_fn = assigned_function(
      cfn, val_sets[static_cast<std::size_t>(static_cast<int>(retrain_task))],
      pretrained.cfn_gamma);

  ForgettingReport ffn_report{retrain_task, {}, 0.0};
  ForgettingReport cfn_report{retrain_task, {}, 0.0};
  ffn_report.curve.emplace_back(0, ffn_validation_loss(ffn, other_val));
  cfn_report.curve.emplace_back(0, cfn_validation_loss(cfn, other_val, pretrained.cfn_gamma));

  // Both models consume the identical retraining batch stream.
  Rng batch_rng(options.seed ^ 0xf09e771cULL ^ static_cast<std::uint64_t>(retrain_task));
  Rng noise_rng(options.seed ^ 0x10155e5dULL ^ static_cast<std::uint64_t>(retrain_task));
  double off_mass_sum = 0.0;
  for (std::int64_t step = 0; step < options.retrain_steps; ++step) {
    auto batch =
        sample_batch(batch_rng.fork_seed(), options.dim, options.batch_size, retrain_task);
    Tensor mean_w;
    cfn_train_step(cfn, batch, step, retrain_cfg, opt, noise_rng, &mean_w);
    ffn_train_step(ffn, batch, opt);
    off_mass_sum += 1.0 - mean_w[own_fn];
    if ((step + 1) % options.eval_every == 0 || step + 1 == options.retrain_steps) {
      ffn_report.curve.emplace_back(step + 1, ffn_validation_loss(ffn, other_val));
      cfn_report.curve.emplace_back(step + 1,
                                    cfn_validation_loss(cfn, other_val, pretrained.cfn_gamma));
    }
  }
  cfn_report.mean_off_task_weight = off_mass_sum / static_cast<double>(options.retrain_steps);
  return {std::move(ffn_report), std::move(cfn_report)};
}

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed) {
  std::vector<GradSuiteEntry> out;
  const double eps = 1e-5;

  {
    Rng rng(seed);
    ParamStore ps;
    DenseLayer layer = make_dense(ps, "dense", 4, 3, rng);
    Tensor x = Tensor::vec({0.3, -0.7, 0.5, 0.1});
    Tensor target = Tensor::vec({0.2, -0.1, 0.6});
    auto fn = [&](ParamStore& p) {
      Tensor y = dense_forward(layer, x, p);
      double loss = l2_loss(y, target);
      dense_backward(layer, x, l2_loss_backward(y, target), p);
      return loss;
    };
    out.push_back({"dense", grad_check(fn, ps, eps).max_rel_error});
  }
  {
    Rng rng(seed + 1);
    ParamStore ps;
    DenseLayer layer = make_dense(ps, "dp", 4, 4, rng);
    ps.add("dp.slope", {1})[0] = 0.25;
    Tensor x = Tensor::vec({0.8, -0.4, 0.2, -0.9});
    Tensor target = Tensor::vec({0.1, 0.4, -0.3, 0.2});
    auto fn = [&](ParamStore& p) {
      double a = p.value("dp.slope")[0];
      Tensor z = dense_forward(layer, x, p);
      Tensor y = prelu(z, a);
      double loss = l2_loss(y, target);
      Tensor dz = prelu_backward(z, a, l2_loss_backward(y, target), p.grad("dp.slope")[0]);
      dense_backward(layer, x, dz, p);
      return loss;
    };
    out.push_back({"prelu", grad_check(fn, ps, eps).max_rel_error});
  }
  {
    Rng rng(seed + 2);
    ParamStore ps;
    LstmCell cell = make_lstm(ps, "lstm", 5, 4, rng);
    Tensor x = Tensor::vec({0.4, -0.2, 0.9, -0.5, 0.3});
    Tensor target = Tensor::vec({0.1, -0.1, 0.2, 0.05});
    auto fn = [&](ParamStore& p) {
      cell.reset();
      LstmStepCache cache;
      Tensor h = lstm_step(cell, x, p, &cache);
      double loss = l2_loss(h, target);
      lstm_step_backward(cell, cache, l2_loss_backward(h, target), Tensor(), p, nullptr, nullptr,
                         nullptr);
      return loss;
    };
    out.push_back({"lstm", grad_check(fn, ps, eps).max_rel_error});
  }
  {
    Rng rng(seed + 3);
    ParamStore ps;
    DenseLayer head = make_dense(ps, "head", 5, 4, rng);
    Tensor h = Tensor::vec({0.2, -0.6, 0.4, 0.9, -0.3});
    Tensor target = Tensor::vec({0.7, 0.1, 0.1, 0.1});
    auto fn = [&](ParamStore& p) {
      Tensor logits = dense_forward(head, h, p);
      Tensor w = softmax(logits);
      double loss = l2_loss(w, target);
      Tensor dlogits = softmax_backward(w, l2_loss_backward(w, target));
      dense_backward(head, h, dlogits, p);
      return loss;
    };
    out.push_back({"softmax_head", grad_check(fn, ps, eps).max_rel_error});
  }
  {
    VaeConfig cfg;
    cfg.side = 8;
    cfg.hidden = 12;
    cfg.layout.total_dim = 6;
    VaeModel model(cfg, seed + 4);
    Rng rng(seed + 5);
    Tensor x = flatten(render_sprite(random_scene(rng), cfg.side));
    Tensor noise = Tensor::zeros({cfg.layout.total_dim});
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
    auto fn = [&](ParamStore&) { return vae_loss_and_grad(model, x, noise); };
    out.push_back({"vae", grad_check(fn, model.params(), eps).max_rel_error});
  }
  {
    CfnConfig cfg;
    cfg.input_dim = 6;
    cfg.num_functions = 3;
    cfg.controller_hidden = 5;
    CfnModel model(cfg, seed + 6);
    TaskSample sample = sample_batch(seed + 7, cfg.input_dim, 1)[0];
    auto fn = [&](ParamStore&) { return cfn_loss_and_grad(model, sample, 3.0); };
    out.push_back({"cfn", grad_check(fn, model.params(), eps).max_rel_error});
  }
  {
    FfnBaseline model(6, kNumPrimitives, seed + 8, 7);
    TaskSample sample = sample_batch(seed + 9, 6, 1)[0];
    auto fn = [&](ParamStore&) { return ffn_loss_and_grad(model, sample, 1.0); };
    out.push_back({"ffn", grad_check(fn, model.params(), eps).max_rel_error});
  }
  return out;
}

}  // namespace entangle
