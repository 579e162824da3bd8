// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/nn/param_store.hpp"

#include <cmath>
#include <cstring>

#include "srgdiff/error.hpp"

namespace srgdiff::nn {

void round_to_float(Tensor& t) {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

ParamStore::ParamStore(const ParamStore& other) : rng_(other.rng_), seed_(other.seed_) {
  for (const auto& p : other.params_) {
    index_[p->name] = params_.size();
    params_.push_back(std::make_unique<Param>(*p));
  }
}

ParamStore& ParamStore::operator=(const ParamStore& other) {
  if (this != &other) {
    ParamStore copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Param& ParamStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  round_to_float(init);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->grad = Tensor(init.shape());
  p->value = std::move(init);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Param& ParamStore::add_he(const std::string& name, Shape shape, std::size_t fan_in,
                          double gain) {
  const double std = std::sqrt(gain / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  return add(name, Tensor::randn(std::move(shape), rng_, std));
}

Param& ParamStore::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor(std::move(shape), value));
}

Param& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

void ParamStore::set_frozen(bool frozen) {
  for (auto& p : params_) p->frozen = frozen;
}

bool ParamStore::all_frozen() const {
  for (const auto& p : params_)
    if (!p->frozen) return false;
  return true;
}

std::uint64_t ParamStore::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : params_) {
    feed(p->name.data(), p->name.size());
    feed(p->value.data(), p->value.size() * sizeof(double));
  }
  return h;
}

void ParamStore::merge(const ParamStore& other, const std::string& prefix) {
  for (const auto& p : other.params_) {
    Param& q = add(prefix + p->name, p->value);
    q.frozen = p->frozen;
    q.lower = p->lower;
    q.upper = p->upper;
  }
}

}  // namespace srgdiff::nn
