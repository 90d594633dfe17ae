#include "entangle/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace entangle {

Tensor& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  if (contains(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  Entry e;
  e.value = Tensor::zeros(shape);
  e.grad = Tensor::zeros(shape);
  e.rms_cache = Tensor::zeros(std::move(shape));
  auto [it, ok] = entries_.emplace(name, std::move(e));
  (void)ok;
  return it->second.value;
}

Tensor& ParamStore::add_uniform(const std::string& name, std::vector<std::size_t> shape,
                                std::size_t in_dim, Rng& rng) {
  Tensor& v = add(name, std::move(shape));
  double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(-s, s);
  return v;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.fill(0.0);
}

std::size_t ParamStore::param_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

}  // namespace entangle
