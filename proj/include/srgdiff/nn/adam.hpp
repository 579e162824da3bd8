// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>

#include "srgdiff/nn/param_store.hpp"

namespace srgdiff::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Frozen parameters are skipped; updated values are
/// rounded to float storage and projected onto each parameter's bounds.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Throws NumericalError naming the first parameter with a non-finite
  /// gradient; no parameter is modified in that case.
  void step(ParamStore& store);

  long steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  AdamConfig config_;
  long step_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

}  // namespace srgdiff::nn
