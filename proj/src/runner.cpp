#include "entangle/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "entangle/checkpoint.hpp"
#include "entangle/experiments.hpp"
#include "entangle/vae.hpp"

namespace entangle {

namespace fs = std::filesystem;

std::string version_string() {
#ifdef ENTANGLE_VERSION
  return ENTANGLE_VERSION;
#else
  return "0.1.0-unknown";
#endif
}

namespace {

std::string resolve_output_dir(const RunConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("ENTANGLE_OUTPUT_DIR")) {
    if (*env) return env;
  }
  return "runs/" + cfg.experiment + "-" + std::to_string(cfg.seed);
}

std::int64_t steps_or(const RunConfig& cfg, std::int64_t experiment_default) {
  return cfg.steps > 0 ? cfg.steps : experiment_default;
}

CfnConfig cfn_config_from(const RunConfig& cfg, std::int64_t total_steps) {
  CfnConfig c;
  c.input_dim = cfg.data.dim;
  c.num_tasks = kNumPrimitives;
  c.num_functions = cfg.cfn.num_functions;
  c.controller_hidden = cfg.cfn.controller_hidden;
  c.noise_sigma = cfg.cfn.noise_sigma;
  c.epsilon_floor = cfg.cfn.epsilon_floor;
  std::int64_t ramp_end = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(cfg.cfn.gamma_ramp_fraction * static_cast<double>(total_steps)));
  c.sharpen_gamma =
      Schedule::linear_ramp(cfg.cfn.gamma_start, cfg.cfn.gamma_end, 0, ramp_end);
  return c;
}

RmspropConfig optimizer_from(const RunConfig& cfg) {
  RmspropConfig opt;
  opt.learning_rate = cfg.optimizer.learning_rate;
  opt.momentum_decay = cfg.optimizer.momentum_decay;
  opt.weight_decay = cfg.optimizer.weight_decay;
  opt.epsilon = cfg.optimizer.epsilon;
  return opt;
}

void write_log_files(const ExperimentLog& log, const fs::path& dir, const std::string& stem) {
  log.write_csv((dir / (stem + ".csv")).string());
  log.write_json((dir / (stem + ".json")).string());
}

int run_train_cfn(const RunConfig& cfg, const fs::path& out_dir, bool with_sharpening) {
  DisentanglementOptions options;
  options.steps = steps_or(cfg, 24000);
  options.seed = cfg.seed;
  options.with_sharpening = with_sharpening;
  options.eval_every = cfg.disentangle.eval_every;
  options.batch_size = cfg.data.batch_size;
  options.val_per_task = cfg.disentangle.val_per_task;

  CfnModel model(cfn_config_from(cfg, options.steps), cfg.seed);
  ExperimentLog log =
      run_disentanglement_experiment(model.config(), options, optimizer_from(cfg), &model);
  write_log_files(log, out_dir, cfg.experiment + "-" + std::to_string(cfg.seed));
  save_checkpoint(model.params(), dump_config(cfg),
                  (out_dir / ("cfn-" + std::to_string(cfg.seed) + ".json")).string());
  std::cout << cfg.experiment << ": params=" << count_params(model.params())
            << " final_val_loss=" << log.last("val_loss")
            << " final_disentanglement=" << log.last("disentanglement") << "\n";
  return 0;
}

int run_train_ffn(const RunConfig& cfg, const fs::path& out_dir) {
  std::int64_t steps = steps_or(cfg, 20000);
  FfnBaseline model(cfg.data.dim, kNumPrimitives, cfg.seed);
  RmspropConfig opt = optimizer_from(cfg);
  Rng batch_rng(cfg.seed ^ 0xba7c4e5dULL);
  auto val_sets = make_validation_sets(cfg.seed ^ 0x7a11U, cfg.data.dim, 256);

  ExperimentLog log;
  log.add(0, "param_count", static_cast<double>(count_params(model.params())));
  for (std::int64_t step = 0; step < steps; ++step) {
    auto batch = sample_batch(batch_rng.fork_seed(), cfg.data.dim, cfg.data.batch_size);
    double loss = ffn_train_step(model, batch, opt);
    if (step % cfg.disentangle.eval_every == 0 || step + 1 == steps) {
      log.add(step, "train_loss", loss);
      double total = 0.0;
      for (const auto& set : val_sets) total += ffn_validation_loss(model, set);
      log.add(step, "val_loss", total / static_cast<double>(val_sets.size()));
    }
  }
  write_log_files(log, out_dir, cfg.experiment + "-" + std::to_string(cfg.seed));
  save_checkpoint(model.params(), dump_config(cfg),
                  (out_dir / ("ffn-" + std::to_string(cfg.seed) + ".json")).string());
  std::cout << "train-ffn: params=" << count_params(model.params())
            << " final_val_loss=" << log.last("val_loss") << "\n";
  return 0;
}

int run_forgetting(const RunConfig& cfg, const fs::path& out_dir) {
  ForgettingOptions options;
  options.seed = cfg.seed;
  options.dim = cfg.data.dim;
  options.batch_size = cfg.data.batch_size;
  options.pretrain_max_steps = cfg.forgetting.pretrain_max_steps;
  options.pretrain_gamma_ramp_steps = cfg.forgetting.pretrain_gamma_ramp_steps;
  options.pretrain_threshold = cfg.forgetting.pretrain_threshold;
  options.pretrain_check_every = cfg.forgetting.pretrain_check_every;
  options.retrain_steps = steps_or(cfg, cfg.forgetting.retrain_steps);
  options.eval_every = cfg.forgetting.eval_every;
  options.val_per_task = cfg.forgetting.val_per_task;

  CfnConfig cfn_cfg = cfn_config_from(cfg, options.pretrain_gamma_ramp_steps);
  RmspropConfig opt = optimizer_from(cfg);
  PretrainedModels pretrained = pretrain_for_forgetting(cfn_cfg, options, opt);
  std::cout << "forgetting: pretrained in " << pretrained.pretrain_steps_used << " steps\n";

  std::vector<PrimitiveId> tasks;
  if (cfg.forgetting.retrain_task == "all") {
    for (int t = 0; t < kNumPrimitives; ++t) tasks.push_back(static_cast<PrimitiveId>(t));
  } else {
    tasks.push_back(primitive_from_name(cfg.forgetting.retrain_task));
  }

  ExperimentLog summary;
  for (PrimitiveId task : tasks) {
    auto [ffn_report, cfn_report] = run_forgetting_experiment(pretrained, task, options, opt);
    ExperimentLog task_log;
    for (const auto& [step, v] : ffn_report.curve) task_log.add(step, "ffn_other_loss", v);
    const std::string& name = primitive_name(task);
    write_log_files(task_log, out_dir,
                    "forgetting-" + name + "-ffn-" + std::to_string(cfg.seed));
    ExperimentLog cfn_log;
    for (const auto& [step, v] : cfn_report.curve) cfn_log.add(step, "cfn_other_loss", v);
    cfn_log.add(options.retrain_steps, "cfn_off_task_weight", cfn_report.mean_off_task_weight);
    write_log_files(cfn_log, out_dir,
                    "forgetting-" + name + "-cfn-" + std::to_string(cfg.seed));

    double ffn_ratio = ffn_report.curve.back().second / ffn_report.curve.front().second;
    double cfn_ratio = cfn_report.curve.back().second / cfn_report.curve.front().second;
    summary.add(0, name + ".ffn_other_loss_ratio", ffn_ratio);
    summary.add(0, name + ".cfn_other_loss_ratio", cfn_ratio);
    summary.add(0, name + ".cfn_off_task_weight", cfn_report.mean_off_task_weight);
    std::cout << "forgetting[" << name << "]: ffn_ratio=" << ffn_ratio
              << " cfn_ratio=" << cfn_ratio
              << " off_task_weight=" << cfn_report.mean_off_task_weight << "\n";
  }
  write_log_files(summary, out_dir, "forgetting-" + std::to_string(cfg.seed));
  return 0;
}

int run_train_vae(const RunConfig& cfg, const fs::path& out_dir) {
  VaeConfig vcfg;
  vcfg.side = cfg.vae.side;
  vcfg.hidden = cfg.vae.hidden;
  vcfg.layout.total_dim = cfg.vae.latent_dim;
  vcfg.batch_size = cfg.vae.batch_size;
  VaeModel model(vcfg, cfg.seed);

  VaeTrainOptions options;
  options.steps = steps_or(cfg, 20000);
  options.seed = cfg.seed;
  options.ratio = cfg.vae.ratio;
  options.log_every = cfg.vae.log_every;
  options.eval_every = cfg.vae.eval_every;

  ExperimentLog log = train_vae(model, options, optimizer_from(cfg));
  write_log_files(log, out_dir, cfg.experiment + "-" + std::to_string(cfg.seed));
  save_checkpoint(model.params(), dump_config(cfg),
                  (out_dir / ("vae-" + std::to_string(cfg.seed) + ".json")).string());

  if (cfg.vae.dump_images) {
    // Reconstructions of a fixed azimuth sweep at the final step.
    ClampedBatch sweep =
        make_clamped_batch(cfg.seed ^ 0xe5a1u, ActiveTransform::kAzimuth, 8, vcfg.side);
    fs::path img_dir =
        out_dir / cfg.experiment / std::to_string(options.steps);
    fs::create_directories(img_dir);
    for (std::size_t k = 0; k < sweep.images.size(); ++k) {
      auto [mu, sigma] = encode(model, sweep.images[k]);
      Tensor flat = decode(model, mu);
      Tensor img = Tensor::matrix(vcfg.side, vcfg.side, flat.values());
      write_pgm(img, (img_dir / (std::to_string(k) + ".pgm")).string());
    }
  }
  std::cout << "train-vae: final_loss=" << log.last("loss")
            << " azimuth_var_ratio=" << log.last("var_azimuth_ratio") << "\n";
  return 0;
}

int run_grad_check(const RunConfig& cfg, const fs::path& out_dir) {
  auto suite = run_gradient_suite(cfg.seed);
  ExperimentLog log;
  bool ok = true;
  for (const auto& entry : suite) {
    log.add(0, "grad_error." + entry.component, entry.max_rel_error);
    std::cout << entry.component << ": max_rel_error=" << format_double(entry.max_rel_error)
              << "\n";
    ok = ok && entry.max_rel_error <= 1e-4;
  }
  write_log_files(log, out_dir, "grad-check-" + std::to_string(cfg.seed));
  std::cout << (ok ? "grad-check: all components within 1e-4\n"
                   : "grad-check: tolerance exceeded\n");
  return ok ? 0 : 1;
}

int run_params_report(const RunConfig& cfg, const fs::path& out_dir) {
  FfnBaseline ffn(cfg.data.dim, kNumPrimitives, cfg.seed);
  CfnModel cfn(cfn_config_from(cfg, 1), cfg.seed);
  ExperimentLog log;
  log.add(0, "ffn_param_count", static_cast<double>(count_params(ffn.params())));
  log.add(0, "cfn_param_count", static_cast<double>(count_params(cfn.params())));
  write_log_files(log, out_dir, "params-report-" + std::to_string(cfg.seed));
  std::cout << "ffn: " << count_params(ffn.params()) << "\n"
            << "cfn: " << count_params(cfn.params()) << "\n";
  return 0;
}

}  // namespace

int run(const RunConfig& cfg) {
  fs::path out_dir = resolve_output_dir(cfg);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << out_dir << ": " << ec.message()
              << "\n";
    return 1;
  }

  auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  std::string failure;
  try {
    if (cfg.experiment == "train-cfn") {
      code = run_train_cfn(cfg, out_dir, true);
    } else if (cfg.experiment == "train-cfn-baseline") {
      code = run_train_cfn(cfg, out_dir, false);
    } else if (cfg.experiment == "train-ffn") {
      code = run_train_ffn(cfg, out_dir);
    } else if (cfg.experiment == "forgetting") {
      code = run_forgetting(cfg, out_dir);
    } else if (cfg.experiment == "train-vae") {
      code = run_train_vae(cfg, out_dir);
    } else if (cfg.experiment == "grad-check") {
      code = run_grad_check(cfg, out_dir);
    } else if (cfg.experiment == "params-report") {
      code = run_params_report(cfg, out_dir);
    } else {
      failure = "unknown experiment: " + cfg.experiment;
      code = 2;
    }
  } catch (const std::exception& e) {
    failure = e.what();
    code = 1;
  }

  if (!failure.empty()) {
    std::ofstream marker(out_dir / "FAILED");
    marker << failure << "\n";
    std::cerr << "error: " << failure << "\n";
  }

  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json manifest;
  manifest["config"] = dump_config(cfg);
  manifest["version"] = version_string();
  manifest["wall_time_seconds"] = wall;
  std::ofstream mf(out_dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
  return code;
}

}  // namespace entangle
