// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "srgdiff/nn/ops.hpp"
#include "srgdiff/random.hpp"

namespace srgdiff::testing {

struct OpCase {
  std::string name;
  nn::ParamStore store;
  LossBuilder loss;
};

/// Projects y onto a fixed random direction so every output element matters.
inline nn::Var project(nn::Tape& tape, nn::Var y, std::uint64_t seed) {
  Rng rng(seed);
  return nn::sum(nn::mul(y, tape.constant(nn::Tensor::randn(y.shape(), rng))));
}

inline nn::Tensor away_from_zero(nn::Tensor t, double margin) {
  for (double& v : t.values())
    if (std::abs(v) < margin) v = v < 0 ? -margin : margin;
  return t;
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(rng.integer(static_cast<long>(lo), static_cast<long>(hi)));
}

/// One random instance of every differentiable op.
inline std::vector<OpCase> make_op_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<OpCase> cases;
  const std::uint64_t proj = rng.engine()();
  auto add_case = [&](std::string name, nn::ParamStore store, LossBuilder loss) {
    cases.push_back({std::move(name), std::move(store), std::move(loss)});
  };
  auto mat = [&](nn::Shape s, double sd = 1.0) { return nn::Tensor::randn(std::move(s), rng, sd); };
  // Parameters are added without float rounding so finite differences see
  // generic double values.
  auto store_with = [](std::vector<std::pair<std::string, nn::Tensor>> items) {
    nn::ParamStore s(1);
    for (auto& [n, t] : items) {
      auto& p = s.add(n, t);
      p.value = t;
    }
    return s;
  };

  {
    const std::size_t n = pick(rng, 1, 5), d = pick(rng, 1, 6);
    add_case("add", store_with({{"a", mat({n, d})}, {"b", mat({n, d})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::add(t.param(s, "a"), t.param(s, "b")), proj);
    });
    add_case("sub", store_with({{"a", mat({n, d})}, {"b", mat({n, d})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::sub(t.param(s, "a"), t.param(s, "b")), proj);
    });
    add_case("mul", store_with({{"a", mat({n, d})}, {"b", mat({n, d})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::mul(t.param(s, "a"), t.param(s, "b")), proj);
    });
    const double k = rng.uniform(-2, 2);
    add_case("scale", store_with({{"a", mat({n, d})}}), [proj, k](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::add_scalar(nn::scale(t.param(s, "a"), k), k), proj);
    });
    add_case("mul_scalar", store_with({{"a", mat({n, d})}, {"s", mat({1})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::mul_scalar(t.param(s, "a"), t.param(s, "s")), proj);
    });
    add_case("square", store_with({{"a", mat({n, d})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::square(t.param(s, "a")), proj);
    });
    add_case("exp", store_with({{"a", mat({n, d})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::exp(t.param(s, "a")), proj);
    });
    add_case("tanh", store_with({{"a", mat({n, d})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::tanh(t.param(s, "a")), proj);
    });
    add_case("silu", store_with({{"a", mat({n, d}, 3.0)}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::silu(t.param(s, "a")), proj);
    });
    nn::Tensor c = mat({n, d}, 2.0);
    for (double& v : c.values())
      if (std::abs(std::abs(v) - 1.0) < 1e-2) v += 0.05;
    add_case("clamp", store_with({{"a", c}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::clamp(t.param(s, "a"), -1.0, 1.0), proj);
    });
    add_case("mean", store_with({{"a", mat({n, d})}}), [](nn::Tape& t, nn::ParamStore& s) {
      return nn::add(nn::mean(t.param(s, "a")), nn::sum(nn::square(t.param(s, "a"))));
    });
    add_case("mean_square", store_with({{"a", mat({n, d})}}), [](nn::Tape& t, nn::ParamStore& s) {
      return nn::mean_square(t.param(s, "a"));
    });
    add_case("mean_abs", store_with({{"a", away_from_zero(mat({n, d}), 1e-2)}}), [](nn::Tape& t, nn::ParamStore& s) {
      return nn::mean_abs(t.param(s, "a"));
    });
  }
  {
    const std::size_t n = pick(rng, 1, 5), in = pick(rng, 1, 6), out = pick(rng, 1, 6);
    add_case("linear", store_with({{"x", mat({n, in})}, {"w", mat({in, out})}, {"b", mat({out})}}),
             [proj](nn::Tape& t, nn::ParamStore& s) {
               return project(t, nn::linear(t.param(s, "x"), t.param(s, "w"), t.param(s, "b")), proj);
             });
  }
  {
    const std::size_t b = pick(rng, 1, 3), cin = pick(rng, 1, 4), cout = pick(rng, 1, 4);
    const std::size_t k = 2 * pick(rng, 0, 2) + 1, stride = pick(rng, 1, 2), pad = pick(rng, 0, k / 2);
    const std::size_t len = k + pick(rng, 0, 8);
    add_case("conv1d", store_with({{"x", mat({b, cin, len})}, {"w", mat({cout, cin, k})}, {"b", mat({cout})}}),
             [proj, stride, pad](nn::Tape& t, nn::ParamStore& s) {
               return project(t, nn::conv1d(t.param(s, "x"), t.param(s, "w"), t.param(s, "b"), stride, pad), proj);
             });
  }
  {
    const std::size_t b = pick(rng, 1, 3), c = pick(rng, 1, 4), len = 2 * pick(rng, 1, 4);
    add_case("upsample2", store_with({{"x", mat({b, c, len})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::upsample2(t.param(s, "x")), proj);
    });
    add_case("avg_pool1d", store_with({{"x", mat({b, c, len})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::avg_pool1d(t.param(s, "x"), 2), proj);
    });
    add_case("mean_time", store_with({{"x", mat({b, c, len})}}), [proj](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::mean_time(t.param(s, "x")), proj);
    });
    add_case("add_channel_bias", store_with({{"x", mat({b, c, len})}, {"v", mat({b, c})}}),
             [proj](nn::Tape& t, nn::ParamStore& s) {
               return project(t, nn::add_channel_bias(t.param(s, "x"), t.param(s, "v")), proj);
             });
    add_case("channel_affine", store_with({{"x", mat({b, c, len})}, {"g", mat({b, c})}, {"beta", mat({b, c})}}),
             [proj](nn::Tape& t, nn::ParamStore& s) {
               return project(t, nn::channel_affine(t.param(s, "x"), t.param(s, "g"), t.param(s, "beta")), proj);
             });
    std::vector<double> w(b);
    for (double& v : w) v = rng.uniform(-1, 1);
    add_case("row_scale", store_with({{"x", mat({b, c, len})}}), [proj, w](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::row_scale(t.param(s, "x"), w), proj);
    });
    const std::size_t c2 = pick(rng, 1, 3);
    add_case("concat", store_with({{"x", mat({b, c, len})}, {"y", mat({b, c2, len})}}),
             [proj](nn::Tape& t, nn::ParamStore& s) {
               return project(t, nn::concat({t.param(s, "x"), t.param(s, "y")}), proj);
             });
    add_case("reshape", store_with({{"x", mat({b, c, len})}}), [proj, b, c, len](nn::Tape& t, nn::ParamStore& s) {
      return project(t, nn::reshape(t.param(s, "x"), {b * c, len}), proj);
    });
  }
  {
    const std::size_t b = pick(rng, 1, 3), groups = pick(rng, 1, 2), c = groups * pick(rng, 1, 3);
    const std::size_t len = pick(rng, 2, 6);
    add_case("group_norm",
             store_with({{"x", mat({b, c, len})}, {"g", mat({c})}, {"beta", mat({c})}}),
             [proj, groups](nn::Tape& t, nn::ParamStore& s) {
               return project(t, nn::group_norm(t.param(s, "x"), groups, t.param(s, "g"), t.param(s, "beta")), proj);
             });
    const std::size_t d = pick(rng, 2, 7);
    add_case("layer_norm", store_with({{"x", mat({b, c, d})}, {"g", mat({d})}, {"beta", mat({d})}}),
             [proj](nn::Tape& t, nn::ParamStore& s) {
               return project(t, nn::layer_norm(t.param(s, "x"), t.param(s, "g"), t.param(s, "beta")), proj);
             });
  }
  {
    const std::size_t b = pick(rng, 1, 2), d = pick(rng, 1, 4), tok = pick(rng, 1, 5);
    const double ws = 0.7;
    add_case("self_attention",
             store_with({{"x", mat({b, d, tok})},
                         {"wq", mat({d, d}, ws)},
                         {"wk", mat({d, d}, ws)},
                         {"wv", mat({d, d}, ws)},
                         {"wo", mat({d, d}, ws)}}),
             [proj](nn::Tape& t, nn::ParamStore& s) {
               return project(t,
                              nn::self_attention(t.param(s, "x"), t.param(s, "wq"), t.param(s, "wk"),
                                                 t.param(s, "wv"), t.param(s, "wo")),
                              proj);
             });
  }
  {
    const std::size_t b = pick(rng, 1, 2), c = pick(rng, 1, 2), win = pick(rng, 4, 8);
    const std::size_t fft = win <= 4 ? 4 : (win <= 8 ? 8 : 16);
    const std::size_t hop = pick(rng, 2, win), len = win + hop * pick(rng, 0, 2);
    // The magnitude has a kink at zero; redraw until every bin clears it.
    nn::Tensor x = mat({b, c, len});
    for (int attempt = 0; attempt < 100; ++attempt) {
      nn::Tape probe;
      const auto& mag = nn::stft_magnitude(probe.constant(x), win, fft, hop).value().values();
      if (*std::min_element(mag.begin(), mag.end()) > 0.1) break;
      x = mat({b, c, len});
    }
    add_case("stft_magnitude", store_with({{"x", x}}),
             [proj, win, fft, hop](nn::Tape& t, nn::ParamStore& s) {
               return project(t, nn::stft_magnitude(t.param(s, "x"), win, fft, hop), proj);
             });
  }
  {
    const std::size_t n = pick(rng, 1, 6), k = pick(rng, 2, 4);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.integer(0, static_cast<long>(k) - 1));
    add_case("softmax_cross_entropy", store_with({{"z", mat({n, k}, 2.0)}}), [labels](nn::Tape& t, nn::ParamStore& s) {
      return nn::softmax_cross_entropy(t.param(s, "z"), labels);
    });
  }
  return cases;
}

}  // namespace srgdiff::testing
