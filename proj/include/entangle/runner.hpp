#pragma once

#include <string>

#include "entangle/config.hpp"

namespace entangle {

std::string version_string();

/// Dispatches the configured experiment, writing logs, checkpoints and a
/// manifest.json into the resolved output directory. Returns the process exit
/// code: 0 on success, nonzero after printing a one-line reason; failed runs
/// keep their partial outputs next to a FAILED marker file.
int run(const RunConfig& cfg);

}  // namespace entangle
