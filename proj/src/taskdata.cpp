#include "entangle/taskdata.hpp"

#include <array>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "entangle/rng.hpp"

namespace entangle {

namespace {
const std::array<std::string, kNumPrimitives> kNames = {
    "rotate", "add-a-b", "rot-a", "switch", "zero", "zero-a", "add-one", "swap-first"};

void require_even_vector(const Tensor& v) {
  if (v.rank() != 1 || v.size() == 0 || v.size() % 2 != 0)
    throw std::invalid_argument("apply_primitive: expected a rank-1 tensor of even length, got " +
                                v.shape_string());
}
}  // namespace

const std::string& primitive_name(PrimitiveId id) { return kNames[static_cast<int>(id)]; }

PrimitiveId primitive_from_name(const std::string& name) {
  for (int i = 0; i < kNumPrimitives; ++i)
    if (kNames[i] == name) return static_cast<PrimitiveId>(i);
  throw std::invalid_argument("unknown primitive name: " + name);
}

Tensor apply_primitive(PrimitiveId id, const Tensor& v) {
  require_even_vector(v);
  const std::size_t n = v.size();
  const std::size_t h = n / 2;
  Tensor out = v;
  switch (id) {
    case PrimitiveId::kRotate:
      for (std::size_t i = 0; i < n; ++i) out[(i + 1) % n] = v[i];
      break;
    case PrimitiveId::kAddAB:
      for (std::size_t i = 0; i < h; ++i) out[i] = v[i] + v[h + i];
      break;
    case PrimitiveId::kRotA:
      for (std::size_t i = 0; i < h; ++i) out[(i + 1) % h] = v[i];
      break;
    case PrimitiveId::kSwitch:
      for (std::size_t i = 0; i < h; ++i) {
        out[i] = v[h + i];
        out[h + i] = v[i];
      }
      break;
    case PrimitiveId::kZero:
      out.fill(0.0);
      break;
    case PrimitiveId::kZeroA:
      for (std::size_t i = 0; i < h; ++i) out[i] = 0.0;
      break;
    case PrimitiveId::kAddOne:
      for (std::size_t i = 0; i < n; ++i) out[i] = v[i] + 1.0;
      break;
    case PrimitiveId::kSwapFirst:
      out[0] = v[1];
      out[1] = v[0];
      break;
  }
  return out;
}

Tensor one_hot_of(PrimitiveId id) {
  Tensor t = Tensor::zeros({static_cast<std::size_t>(kNumPrimitives)});
  t[static_cast<std::size_t>(static_cast<int>(id))] = 1.0;
  return t;
}

std::vector<TaskSample> sample_batch(std::uint64_t seed, std::size_t dim, std::size_t batch_size,
                                     std::optional<PrimitiveId> task) {
  if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("sample_batch: dim must be even");
  if (batch_size < 1) throw std::invalid_argument("sample_batch: batch_size must be >= 1");
  Rng rng(seed);
  std::vector<TaskSample> batch;
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    TaskSample s;
    s.input = Tensor::zeros({dim});
    for (std::size_t i = 0; i < dim; ++i) s.input[i] = rng.uniform();
    s.task = task ? *task : static_cast<PrimitiveId>(rng.uniform_int(kNumPrimitives));
    s.one_hot = one_hot_of(s.task);
    s.target = apply_primitive(s.task, s.input);
    batch.push_back(std::move(s));
  }
  return batch;
}

std::string task_samples_to_jsonl(const std::vector<TaskSample>& samples) {
  std::ostringstream os;
  for (const auto& s : samples) {
    nlohmann::json j;
    j["input"] = s.input.values();
    j["task"] = primitive_name(s.task);
    j["target"] = s.target.values();
    os << j.dump() << "\n";
  }
  return os.str();
}

}  // namespace entangle
