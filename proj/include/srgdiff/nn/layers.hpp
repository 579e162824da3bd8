// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "srgdiff/nn/ops.hpp"

namespace srgdiff::nn {

/// Largest group count <= `groups` that divides `channels`.
std::size_t norm_groups(std::size_t channels, std::size_t groups);

void add_conv(ParamStore& s, const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
              double gain = 2.0);
Var conv(Tape& t, ParamStore& s, const std::string& name, Var x, std::size_t stride = 1);

void add_dense(ParamStore& s, const std::string& name, std::size_t in, std::size_t out, double gain = 2.0);
Var dense(Tape& t, ParamStore& s, const std::string& name, Var x);

void add_norm(ParamStore& s, const std::string& name, std::size_t channels);
Var norm(Tape& t, ParamStore& s, const std::string& name, Var x, std::size_t groups);

/// Pre-activation residual block: GN, SiLU, conv, [+ projected embedding],
/// GN, SiLU, conv, plus a 1x1 shortcut when the width changes.
void add_resblock(ParamStore& s, const std::string& name, std::size_t cin, std::size_t cout,
                  std::size_t emb_dim = 0);
Var resblock(Tape& t, ParamStore& s, const std::string& name, Var x, std::size_t groups, Var emb = {});

/// x + attention(GN(x)) over the temporal axis.
void add_attention(ParamStore& s, const std::string& name, std::size_t channels);
Var attention(Tape& t, ParamStore& s, const std::string& name, Var x, std::size_t groups);

}  // namespace srgdiff::nn
