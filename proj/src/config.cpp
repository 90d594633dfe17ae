#include "entangle/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "entangle/taskdata.hpp"

namespace entangle {

namespace {

using nlohmann::json;

/// Reads known keys out of one JSON object and rejects everything else.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj.is_object()) throw ConfigError(label("") + "expected a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    known_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(label(key) + "has the wrong type");
    }
  }

  const json* child(const char* key) {
    known_.insert(key);
    if (!obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!known_.count(key))
        throw ConfigError(label(key) + "is not a recognized key");
  }

 private:
  std::string label(const std::string& key) const {
    std::string path = prefix_.empty() ? key : (key.empty() ? prefix_ : prefix_ + "." + key);
    return path.empty() ? "config: " : path + ": ";
  }

  const json& obj_;
  std::string prefix_;
  std::set<std::string> known_;
};

void require(bool ok, const std::string& key, const std::string& constraint) {
  if (!ok) throw ConfigError(key + ": " + constraint);
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"train-cfn",  "train-cfn-baseline",
                                                 "train-ffn",  "forgetting",
                                                 "train-vae",  "grad-check",
                                                 "params-report"};
  return names;
}

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  ObjectReader root(j, "");

  std::int64_t seed = static_cast<std::int64_t>(cfg.seed);
  root.read("seed", seed);
  require(seed >= 0, "seed", "must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);

  root.read("experiment", cfg.experiment);
  if (!cfg.experiment.empty()) {
    const auto& names = experiment_names();
    require(std::find(names.begin(), names.end(), cfg.experiment) != names.end(), "experiment",
            "must be one of the known experiments");
  }
  root.read("steps", cfg.steps);
  require(cfg.steps >= 0, "steps", "must be >= 0");
  root.read("output_dir", cfg.output_dir);

  if (const json* c = root.child("data")) {
    ObjectReader r(*c, "data");
    r.read("dim", cfg.data.dim);
    r.read("batch_size", cfg.data.batch_size);
    r.finish();
    require(cfg.data.dim >= 2 && cfg.data.dim % 2 == 0, "data.dim", "must be even and >= 2");
    require(cfg.data.batch_size >= 1, "data.batch_size", "must be >= 1");
  }

  if (const json* c = root.child("cfn")) {
    ObjectReader r(*c, "cfn");
    r.read("num_functions", cfg.cfn.num_functions);
    r.read("controller_hidden", cfg.cfn.controller_hidden);
    r.read("noise_sigma", cfg.cfn.noise_sigma);
    r.read("epsilon_floor", cfg.cfn.epsilon_floor);
    r.read("gamma_start", cfg.cfn.gamma_start);
    r.read("gamma_end", cfg.cfn.gamma_end);
    r.read("gamma_ramp_fraction", cfg.cfn.gamma_ramp_fraction);
    r.finish();
    require(cfg.cfn.num_functions >= 1, "cfn.num_functions", "must be >= 1");
    require(cfg.cfn.controller_hidden >= 1, "cfn.controller_hidden", "must be >= 1");
    require(cfg.cfn.noise_sigma >= 0.0, "cfn.noise_sigma", "must be >= 0");
    require(cfg.cfn.epsilon_floor > 0.0, "cfn.epsilon_floor", "must be > 0");
    require(cfg.cfn.gamma_start >= 1.0, "cfn.gamma_start", "must be >= 1");
    require(cfg.cfn.gamma_end >= cfg.cfn.gamma_start, "cfn.gamma_end", "must be >= gamma_start");
    require(cfg.cfn.gamma_ramp_fraction > 0.0 && cfg.cfn.gamma_ramp_fraction <= 1.0,
            "cfn.gamma_ramp_fraction", "must be in (0, 1]");
  }

  if (const json* c = root.child("optimizer")) {
    ObjectReader r(*c, "optimizer");
    r.read("learning_rate", cfg.optimizer.learning_rate);
    r.read("momentum_decay", cfg.optimizer.momentum_decay);
    r.read("weight_decay", cfg.optimizer.weight_decay);
    r.read("epsilon", cfg.optimizer.epsilon);
    r.finish();
    require(cfg.optimizer.learning_rate > 0.0, "optimizer.learning_rate", "must be > 0");
    require(cfg.optimizer.momentum_decay >= 0.0 && cfg.optimizer.momentum_decay < 1.0,
            "optimizer.momentum_decay", "must be in [0, 1)");
    require(cfg.optimizer.weight_decay >= 0.0, "optimizer.weight_decay", "must be >= 0");
    require(cfg.optimizer.epsilon > 0.0, "optimizer.epsilon", "must be > 0");
  }

  if (const json* c = root.child("vae")) {
    ObjectReader r(*c, "vae");
    r.read("side", cfg.vae.side);
    r.read("hidden", cfg.vae.hidden);
    r.read("latent_dim", cfg.vae.latent_dim);
    r.read("batch_size", cfg.vae.batch_size);
    r.read("ratio", cfg.vae.ratio);
    r.read("log_every", cfg.vae.log_every);
    r.read("eval_every", cfg.vae.eval_every);
    r.read("dump_images", cfg.vae.dump_images);
    r.finish();
    require(cfg.vae.side >= 8, "vae.side", "must be >= 8");
    require(cfg.vae.hidden >= 1, "vae.hidden", "must be >= 1");
    require(cfg.vae.latent_dim >= 4, "vae.latent_dim", "must be >= 4");
    require(cfg.vae.batch_size >= 2, "vae.batch_size", "must be >= 2");
    double ratio_sum = 0.0;
    for (double v : cfg.vae.ratio) {
      require(v >= 0.0, "vae.ratio", "entries must be >= 0");
      ratio_sum += v;
    }
    require(ratio_sum > 0.0, "vae.ratio", "must have positive mass");
    require(cfg.vae.log_every >= 1, "vae.log_every", "must be >= 1");
    require(cfg.vae.eval_every >= 0, "vae.eval_every", "must be >= 0");
  }

  if (const json* c = root.child("disentangle")) {
    ObjectReader r(*c, "disentangle");
    r.read("eval_every", cfg.disentangle.eval_every);
    r.read("val_per_task", cfg.disentangle.val_per_task);
    r.finish();
    require(cfg.disentangle.eval_every >= 1, "disentangle.eval_every", "must be >= 1");
    require(cfg.disentangle.val_per_task >= 1, "disentangle.val_per_task", "must be >= 1");
  }

  if (const json* c = root.child("forgetting")) {
    ObjectReader r(*c, "forgetting");
    r.read("retrain_task", cfg.forgetting.retrain_task);
    r.read("pretrain_threshold", cfg.forgetting.pretrain_threshold);
    r.read("pretrain_max_steps", cfg.forgetting.pretrain_max_steps);
    r.read("pretrain_gamma_ramp_steps", cfg.forgetting.pretrain_gamma_ramp_steps);
    r.read("pretrain_check_every", cfg.forgetting.pretrain_check_every);
    r.read("retrain_steps", cfg.forgetting.retrain_steps);
    r.read("eval_every", cfg.forgetting.eval_every);
    r.read("val_per_task", cfg.forgetting.val_per_task);
    r.finish();
    if (cfg.forgetting.retrain_task != "all") {
      try {
        primitive_from_name(cfg.forgetting.retrain_task);
      } catch (const std::invalid_argument&) {
        throw ConfigError("forgetting.retrain_task: must be \"all\" or a primitive name");
      }
    }
    require(cfg.forgetting.pretrain_threshold > 0.0, "forgetting.pretrain_threshold",
            "must be > 0");
    require(cfg.forgetting.pretrain_max_steps >= 1, "forgetting.pretrain_max_steps",
            "must be >= 1");
    require(cfg.forgetting.pretrain_gamma_ramp_steps >= 1,
            "forgetting.pretrain_gamma_ramp_steps", "must be >= 1");
    require(cfg.forgetting.pretrain_check_every >= 1, "forgetting.pretrain_check_every",
            "must be >= 1");
    require(cfg.forgetting.retrain_steps >= 1, "forgetting.retrain_steps", "must be >= 1");
    require(cfg.forgetting.eval_every >= 1, "forgetting.eval_every", "must be >= 1");
    require(cfg.forgetting.val_per_task >= 1, "forgetting.val_per_task", "must be >= 1");
  }

  root.finish();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: malformed JSON in " + path + ": " + e.what());
  }
  return parse_config(j);
}

nlohmann::json dump_config(const RunConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  j["seed"] = cfg.seed;
  j["steps"] = cfg.steps;
  j["output_dir"] = cfg.output_dir;
  j["data"] = {{"dim", cfg.data.dim}, {"batch_size", cfg.data.batch_size}};
  j["cfn"] = {{"num_functions", cfg.cfn.num_functions},
              {"controller_hidden", cfg.cfn.controller_hidden},
              {"noise_sigma", cfg.cfn.noise_sigma},
              {"epsilon_floor", cfg.cfn.epsilon_floor},
              {"gamma_start", cfg.cfn.gamma_start},
              {"gamma_end", cfg.cfn.gamma_end},
              {"gamma_ramp_fraction", cfg.cfn.gamma_ramp_fraction}};
  j["optimizer"] = {{"learning_rate", cfg.optimizer.learning_rate},
                    {"momentum_decay", cfg.optimizer.momentum_decay},
                    {"weight_decay", cfg.optimizer.weight_decay},
                    {"epsilon", cfg.optimizer.epsilon}};
  j["vae"] = {{"side", cfg.vae.side},
              {"hidden", cfg.vae.hidden},
              {"latent_dim", cfg.vae.latent_dim},
              {"batch_size", cfg.vae.batch_size},
              {"ratio", cfg.vae.ratio},
              {"log_every", cfg.vae.log_every},
              {"eval_every", cfg.vae.eval_every},
              {"dump_images", cfg.vae.dump_images}};
  j["disentangle"] = {{"eval_every", cfg.disentangle.eval_every},
                      {"val_per_task", cfg.disentangle.val_per_task}};
  j["forgetting"] = {{"retrain_task", cfg.forgetting.retrain_task},
                     {"pretrain_threshold", cfg.forgetting.pretrain_threshold},
                     {"pretrain_max_steps", cfg.forgetting.pretrain_max_steps},
                     {"pretrain_gamma_ramp_steps", cfg.forgetting.pretrain_gamma_ramp_steps},
                     {"pretrain_check_every", cfg.forgetting.pretrain_check_every},
                     {"retrain_steps", cfg.forgetting.retrain_steps},
                     {"eval_every", cfg.forgetting.eval_every},
                     {"val_per_task", cfg.forgetting.val_per_task}};
  return j;
}

void apply_override(nlohmann::json& doc, const std::string& dotted_key,
                    const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("override: empty key");
  std::string pointer = "/";
  for (char c : dotted_key) pointer += (c == '.') ? '/' : c;

  json parsed;
  char* end = nullptr;
  double num = std::strtod(value.c_str(), &end);
  if (end && *end == '\0' && end != value.c_str()) {
    if (value.find_first_of(".eE") == std::string::npos &&
        num == static_cast<double>(static_cast<std::int64_t>(num)))
      parsed = static_cast<std::int64_t>(num);
    else
      parsed = num;
  } else if (value == "true" || value == "false") {
    parsed = (value == "true");
  } else {
    parsed = value;
  }
  doc[nlohmann::json::json_pointer(pointer)] = parsed;
}

}  // namespace entangle
