// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "srgdiff/nn/tensor.hpp"

namespace srgdiff::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;
  // Projection box applied after every optimizer step.
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// Named trainable tensors. Values are kept representable in single
/// precision so checkpoints (f32 payload) round-trip bit-exactly; all
/// arithmetic runs in double.
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : rng_(seed), seed_(seed) {}

  ParamStore(const ParamStore& other);
  ParamStore& operator=(const ParamStore& other);
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Param& add(const std::string& name, Tensor init);
  /// Fan-in scaled Gaussian, stddev sqrt(gain / fan_in).
  Param& add_he(const std::string& name, Shape shape, std::size_t fan_in, double gain = 2.0);
  Param& add_constant(const std::string& name, Shape shape, double value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  const std::vector<std::unique_ptr<Param>>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t parameter_count() const;

  void zero_grad();
  void set_frozen(bool frozen);
  bool all_frozen() const;
  /// FNV-1a over names and value bits; detects any parameter change.
  std::uint64_t hash() const;
  std::uint64_t seed() const { return seed_; }

  /// Moves every parameter of `other` into this store under `prefix`.
  void merge(const ParamStore& other, const std::string& prefix = "");

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::unordered_map<std::string, std::size_t> index_;
  Rng rng_{0};
  std::uint64_t seed_ = 0;
};

/// Rounds every element to the nearest float.
void round_to_float(Tensor& t);

}  // namespace srgdiff::nn
