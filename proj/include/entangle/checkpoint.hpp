#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "entangle/param_store.hpp"

namespace entangle {

inline constexpr int kCheckpointFormatVersion = 1;

/// JSON document {format_version, config, params: {name -> {shape, data}}},
/// written atomically (temp file in the same directory, then rename). Doubles
/// serialize with full round-trip precision.
void save_checkpoint(const ParamStore& store, const nlohmann::json& config,
                     const std::string& path);

/// Loads a checkpoint into a fresh store. Throws on a missing/corrupted file
/// or a format_version mismatch; no partial result escapes.
ParamStore load_checkpoint(const std::string& path, nlohmann::json* config_out = nullptr);

/// Loads into an existing model's store, requiring the exact parameter set;
/// a shape or name mismatch names the offending parameter.
void load_checkpoint_into(ParamStore& store, const std::string& path,
                          nlohmann::json* config_out = nullptr);

}  // namespace entangle
