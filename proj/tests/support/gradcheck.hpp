// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "srgdiff/nn/param_store.hpp"
#include "srgdiff/nn/tape.hpp"

namespace srgdiff::testing {

using LossBuilder = std::function<nn::Var(nn::Tape&, nn::ParamStore&)>;

struct GradCheck {
  double rel_error = 0.0;
  std::size_t checked = 0;
};

inline double eval_loss(const LossBuilder& build, nn::ParamStore& store) {
  nn::Tape tape;
  return build(tape, store).value()[0];
}

/// Central differences over every trainable entry (or `max_entries` evenly
/// spaced entries per parameter). Relative error is measured on the full
/// gradient vector: |analytic - numeric| / max(|analytic|, |numeric|).
inline GradCheck check_gradients(const LossBuilder& build, nn::ParamStore& store, double step = 1e-4,
                                 std::size_t max_entries = 0) {
  store.zero_grad();
  {
    nn::Tape tape;
    tape.backward(build(tape, store));
  }
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  GradCheck out;
  for (const auto& p : store.params()) {
    if (p->frozen) continue;
    const std::size_t n = p->value.size();
    const std::size_t stride = (max_entries == 0 || n <= max_entries) ? 1 : n / max_entries;
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = p->value[i];
      p->value[i] = orig + step;
      const double up = eval_loss(build, store);
      p->value[i] = orig - step;
      const double down = eval_loss(build, store);
      p->value[i] = orig;
      const double num = (up - down) / (2.0 * step);
      const double ana = p->grad[i];
      diff2 += (num - ana) * (num - ana);
      a2 += ana * ana;
      n2 += num * num;
      ++out.checked;
    }
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-10});
  out.rel_error = std::sqrt(diff2) / denom;
  return out;
}

}  // namespace srgdiff::testing
