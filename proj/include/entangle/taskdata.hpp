#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entangle/tensor.hpp"

namespace entangle {

/// The eight primitive vector functions, stable encoding 0..7.
enum class PrimitiveId : int {
  kRotate = 0,
  kAddAB = 1,
  kRotA = 2,
  kSwitch = 3,
  kZero = 4,
  kZeroA = 5,
  kAddOne = 6,
  kSwapFirst = 7,
};

inline constexpr int kNumPrimitives = 8;

const std::string& primitive_name(PrimitiveId id);
/// Throws std::invalid_argument for unknown names.
PrimitiveId primitive_from_name(const std::string& name);

struct TaskSample {
  Tensor input;    // [dim], entries in [0,1]
  PrimitiveId task;
  Tensor one_hot;  // [8]
  Tensor target;   // [dim]
};

/// Exact table semantics; v must be rank-1 with even length. v is not modified.
Tensor apply_primitive(PrimitiveId id, const Tensor& v);

Tensor one_hot_of(PrimitiveId id);

/// Inputs i.i.d. uniform in [0,1]^dim. When task is set all samples share it,
/// otherwise tasks are drawn uniformly. Deterministic per seed.
std::vector<TaskSample> sample_batch(std::uint64_t seed, std::size_t dim, std::size_t batch_size,
                                     std::optional<PrimitiveId> task = std::nullopt);

/// JSON lines, one sample per line with fields input, task, target.
std::string task_samples_to_jsonl(const std::vector<TaskSample>& samples);

}  // namespace entangle
