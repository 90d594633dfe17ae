#include "entangle/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace entangle {

namespace {

nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint: malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

ParamStore parse_params(const nlohmann::json& doc, const std::string& path,
                        nlohmann::json* config_out) {
  if (!doc.is_object() || !doc.contains("format_version"))
    throw std::runtime_error("checkpoint: " + path + " is not a checkpoint document");
  int version = doc.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion)
    throw std::runtime_error("checkpoint: format_version " + std::to_string(version) +
                             " does not match expected " +
                             std::to_string(kCheckpointFormatVersion));
  if (config_out) *config_out = doc.value("config", nlohmann::json::object());

  ParamStore store;
  for (const auto& [name, entry] : doc.at("params").items()) {
    std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::vector<double> data = entry.at("data").get<std::vector<double>>();
    Tensor& value = store.add(name, shape);
    if (value.size() != data.size())
      throw std::runtime_error("checkpoint: parameter " + name +
                               " has data inconsistent with its shape");
    for (std::size_t i = 0; i < data.size(); ++i) value[i] = data[i];
  }
  return store;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const nlohmann::json& config,
                     const std::string& path) {
  nlohmann::json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["config"] = config;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, e] : store.entries()) {
    params[name] = {{"shape", e.value.shape()}, {"data", e.value.values()}};
  }
  doc["params"] = std::move(params);

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp);
    out << doc.dump(2) << "\n";
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("checkpoint: rename failed for " + path);
  }
}

ParamStore load_checkpoint(const std::string& path, nlohmann::json* config_out) {
  return parse_params(parse_file(path), path, config_out);
}

void load_checkpoint_into(ParamStore& store, const std::string& path,
                          nlohmann::json* config_out) {
  ParamStore loaded = load_checkpoint(path, config_out);
  for (const auto& [name, e] : store.entries()) {
    if (!loaded.contains(name))
      throw std::runtime_error("checkpoint: missing parameter " + name);
    const Tensor& v = loaded.value(name);
    if (!v.same_shape(e.value))
      throw std::runtime_error("checkpoint: shape mismatch for parameter " + name + ": expected " +
                               e.value.shape_string() + ", found " + v.shape_string());
  }
  for (const auto& [name, e] : loaded.entries()) {
    if (!store.contains(name))
      throw std::runtime_error("checkpoint: unexpected parameter " + name);
  }
  for (auto& [name, e] : store.entries()) e.value = loaded.value(name);
}

}  // namespace entangle
