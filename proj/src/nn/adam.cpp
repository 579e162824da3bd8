// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/nn/adam.hpp"

#include <algorithm>
#include <cmath>

#include "srgdiff/error.hpp"

namespace srgdiff::nn {

void Adam::step(ParamStore& store) {
  for (const auto& p : store.params()) {
    if (p->frozen) continue;
    if (!p->grad.all_finite()) throw NumericalError("non-finite gradient for parameter '" + p->name + "'");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (const auto& p : store.params()) {
    if (p->frozen) continue;
    auto [it, fresh] = moments_.try_emplace(p->name);
    Moments& mo = it->second;
    if (fresh || mo.m.shape() != p->value.shape()) {
      mo.m = Tensor(p->value.shape());
      mo.v = Tensor(p->value.shape());
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.size() == p->value.size() ? p->grad[i] : 0.0;
      mo.m[i] = config_.beta1 * mo.m[i] + (1.0 - config_.beta1) * g;
      mo.v[i] = config_.beta2 * mo.v[i] + (1.0 - config_.beta2) * g * g;
      const double mh = mo.m[i] / bc1;
      const double vh = mo.v[i] / bc2;
      double& w = p->value[i];
      w -= config_.lr * mh / (std::sqrt(vh) + config_.eps);
      w = std::clamp(w, p->lower, p->upper);
    }
    round_to_float(p->value);
  }
}

}  // namespace srgdiff::nn
