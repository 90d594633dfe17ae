#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "entangle/config.hpp"
#include "entangle/runner.hpp"

namespace {

int describe() {
  entangle::RunConfig defaults;
  std::cout << entangle::dump_config(defaults).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entangle: disentangled-representation experiments"};
  app.set_version_flag("--version", entangle::version_string());

  std::string experiment;
  std::string config_path;
  std::string help_experiments = "describe";
  for (const auto& name : entangle::experiment_names()) help_experiments += ", " + name;
  app.add_option("experiment", experiment, "one of: " + help_experiments)->required();
  app.add_option("--config", config_path, "JSON config file");
  app.allow_extras();  // remaining --key value pairs override config keys

  CLI11_PARSE(app, argc, argv);

  if (experiment == "describe") return describe();

  try {
    nlohmann::json doc = nlohmann::json::object();
    if (!config_path.empty()) {
      // Parse once for early validation of the file itself.
      entangle::load_config(config_path);
      std::ifstream in(config_path);
      in >> doc;
    }

    std::vector<std::string> extras = app.remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      std::string key = extras[i];
      if (key.rfind("--", 0) != 0 || key.size() <= 2) {
        std::cerr << "error: expected --key value pairs, got \"" << key << "\"\n";
        return 2;
      }
      if (i + 1 >= extras.size()) {
        std::cerr << "error: missing value for " << key << "\n";
        return 2;
      }
      entangle::apply_override(doc, key.substr(2), extras[++i]);
    }
    doc["experiment"] = experiment;

    entangle::RunConfig cfg = entangle::parse_config(doc);
    return entangle::run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
