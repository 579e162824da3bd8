// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/nn/layers.hpp"

namespace srgdiff::nn {

std::size_t norm_groups(std::size_t channels, std::size_t groups) {
  std::size_t g = std::max<std::size_t>(1, std::min(groups, channels));
  while (channels % g != 0) --g;
  return g;
}

void add_conv(ParamStore& s, const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
              double gain) {
  s.add_he(name + ".w", {cout, cin, k}, cin * k, gain);
  s.add_constant(name + ".b", {cout}, 0.0);
}

Var conv(Tape& t, ParamStore& s, const std::string& name, Var x, std::size_t stride) {
  Var w = t.param(s, name + ".w");
  return conv1d(x, w, t.param(s, name + ".b"), stride, w.shape()[2] / 2);
}

void add_dense(ParamStore& s, const std::string& name, std::size_t in, std::size_t out, double gain) {
  s.add_he(name + ".w", {in, out}, in, gain);
  s.add_constant(name + ".b", {out}, 0.0);
}

Var dense(Tape& t, ParamStore& s, const std::string& name, Var x) {
  return linear(x, t.param(s, name + ".w"), t.param(s, name + ".b"));
}

void add_norm(ParamStore& s, const std::string& name, std::size_t channels) {
  s.add_constant(name + ".g", {channels}, 1.0);
  s.add_constant(name + ".b", {channels}, 0.0);
}

Var norm(Tape& t, ParamStore& s, const std::string& name, Var x, std::size_t groups) {
  return group_norm(x, norm_groups(x.shape()[1], groups), t.param(s, name + ".g"), t.param(s, name + ".b"));
}

void add_resblock(ParamStore& s, const std::string& name, std::size_t cin, std::size_t cout, std::size_t emb_dim) {
  add_norm(s, name + ".n1", cin);
  add_conv(s, name + ".c1", cin, cout, 3);
  if (emb_dim > 0) add_dense(s, name + ".emb", emb_dim, cout, 1.0);
  add_norm(s, name + ".n2", cout);
  add_conv(s, name + ".c2", cout, cout, 3, 0.5);
  if (cin != cout) add_conv(s, name + ".skip", cin, cout, 1, 1.0);
}

Var resblock(Tape& t, ParamStore& s, const std::string& name, Var x, std::size_t groups, Var emb) {
  Var h = conv(t, s, name + ".c1", silu(norm(t, s, name + ".n1", x, groups)));
  if (emb.valid()) h = add_channel_bias(h, dense(t, s, name + ".emb", emb));
  h = conv(t, s, name + ".c2", silu(norm(t, s, name + ".n2", h, groups)));
  Var shortcut = s.contains(name + ".skip.w") ? conv(t, s, name + ".skip", x) : x;
  return add(shortcut, h);
}

void add_attention(ParamStore& s, const std::string& name, std::size_t channels) {
  add_norm(s, name + ".n", channels);
  for (const char* w : {".q", ".k", ".v"}) s.add_he(name + w, {channels, channels}, channels, 1.0);
  s.add_he(name + ".o", {channels, channels}, channels, 0.25);
}

Var attention(Tape& t, ParamStore& s, const std::string& name, Var x, std::size_t groups) {
  Var h = norm(t, s, name + ".n", x, groups);
  return add(x, self_attention(h, t.param(s, name + ".q"), t.param(s, name + ".k"), t.param(s, name + ".v"),
                               t.param(s, name + ".o")));
}

}  // namespace srgdiff::nn
