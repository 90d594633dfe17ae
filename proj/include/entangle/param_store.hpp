#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "entangle/rng.hpp"
#include "entangle/tensor.hpp"

namespace entangle {

/// Named trainable tensors with paired gradient buffers and rmsprop caches.
/// Entries iterate in name order, so whole-store operations are deterministic.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor rms_cache;
  };

  /// Registers a zero-initialized parameter. Throws if the name exists.
  Tensor& add(const std::string& name, std::vector<std::size_t> shape);
  /// Registers a parameter initialized uniformly in [-s, s] with s = 1/sqrt(in_dim).
  Tensor& add_uniform(const std::string& name, std::vector<std::size_t> shape,
                      std::size_t in_dim, Rng& rng);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& grad(const std::string& name) { return entry(name).grad; }

  void zero_grads();
  std::size_t param_count() const;

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace entangle
