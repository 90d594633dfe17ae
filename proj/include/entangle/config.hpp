#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace entangle {

/// Validation failures carry the offending key and constraint.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  std::int64_t steps = 0;  // 0 means the experiment's default
  std::string output_dir;  // empty: $ENTANGLE_OUTPUT_DIR, then runs/<experiment>-<seed>

  struct Data {
    std::size_t dim = 10;
    std::size_t batch_size = 20;
  } data;

  struct Cfn {
    std::size_t num_functions = 8;
    std::size_t controller_hidden = 10;
    double noise_sigma = 0.05;
    double epsilon_floor = 1e-6;
    double gamma_start = 1.0;
    double gamma_end = 100.0;
    double gamma_ramp_fraction = 0.8;  // share of total steps spent ramping
  } cfn;

  struct Optimizer {
    double learning_rate = 0.0005;
    double momentum_decay = 0.1;
    double weight_decay = 0.01;
    double epsilon = 1e-8;
  } optimizer;

  struct Vae {
    std::size_t side = 32;
    std::size_t hidden = 256;
    std::size_t latent_dim = 16;
    std::size_t batch_size = 20;
    std::array<double, 4> ratio = {1.0, 1.0, 1.0, 10.0};
    std::int64_t log_every = 100;
    std::int64_t eval_every = 2000;
    bool dump_images = true;
  } vae;

  struct Disentangle {
    std::int64_t eval_every = 1000;
    std::size_t val_per_task = 256;
  } disentangle;

  struct Forgetting {
    std::string retrain_task = "all";
    double pretrain_threshold = 0.01;
    std::int64_t pretrain_max_steps = 60000;
    std::int64_t pretrain_gamma_ramp_steps = 16000;
    std::int64_t pretrain_check_every = 1000;
    std::int64_t retrain_steps = 5000;
    std::int64_t eval_every = 100;
    std::size_t val_per_task = 1024;
  } forgetting;
};

const std::vector<std::string>& experiment_names();

/// Parses and validates; unknown keys are rejected, violations name the key.
RunConfig parse_config(const nlohmann::json& j);
/// Reads a JSON file and delegates to parse_config.
RunConfig load_config(const std::string& path);
/// Canonical JSON snapshot; parse_config(dump_config(c)) is the identity.
nlohmann::json dump_config(const RunConfig& cfg);

/// Applies one `--a.b.c value` style override onto a config JSON document.
/// Values parse as number, then bool, then string.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

}  // namespace entangle
