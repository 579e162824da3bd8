// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "srgdiff/nn/tape.hpp"

// Differentiable operators. Feature maps are batch x channels x length;
// dense activations are batch x features.
namespace srgdiff::nn {

// Elementwise.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// s is a one-element tensor broadcast over a.
Var mul_scalar(Var a, Var s);
Var square(Var a);
Var exp(Var a);
Var tanh(Var a);
Var silu(Var a);
/// Gradient passes where lo <= x <= hi.
Var clamp(Var a, double lo, double hi);

// Reductions to a one-element tensor.
Var sum(Var a);
Var mean(Var a);
Var mean_square(Var a);
Var mean_abs(Var a);

/// y = x W + b for x: batch x in, W: in x out, b: out (b may be invalid).
Var linear(Var x, Var w, Var b);

/// Cross-correlation with zero padding. x: B x Cin x L, w: Cout x Cin x K,
/// b: Cout (may be invalid).
Var conv1d(Var x, Var w, Var b, std::size_t stride = 1, std::size_t padding = 0);

/// Nearest-neighbour x2 upsampling along the length axis.
Var upsample2(Var x);
/// Mean over non-overlapping length-k blocks; L must be divisible by k.
Var avg_pool1d(Var x, std::size_t k);
/// B x C x L -> B x C.
Var mean_time(Var x);

/// Normalization over (C/groups) x L blocks with per-channel affine.
Var group_norm(Var x, std::size_t groups, Var gain, Var bias, double eps = 1e-5);
/// Normalization over the last axis. gain/bias of last-axis size, or invalid
/// for unit gain and zero bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

/// y[b,c,l] = x[b,c,l] + v[b,c].
Var add_channel_bias(Var x, Var v);
/// y[b,c,l] = g[b,c] * x[b,c,l] + beta[b,c].
Var channel_affine(Var x, Var g, Var beta);
/// y[b,:] = w[b] * x[b,:] with w constant.
Var row_scale(Var x, const std::vector<double>& w);

/// Concatenation along axis 1.
Var concat(const std::vector<Var>& parts);
Var reshape(Var x, Shape shape);

/// Single-head scaled dot-product self-attention with output projection.
/// Input is tokens x d (rank 2) or, for feature maps, B x d x tokens
/// (rank 3, channels first). All weights are d x d.
Var self_attention(Var x, Var wq, Var wk, Var wv, Var wo);

/// Softmax attention weights for tokens x d input (diagnostics and tests).
Tensor attention_weights(const Tensor& tokens, const Tensor& wq, const Tensor& wk);

/// Hann-windowed STFT magnitudes. x: B x C x L -> B x C x frames x bins.
Var stft_magnitude(Var x, std::size_t win_len, std::size_t fft_len, std::size_t hop);

/// Mean negative log-likelihood of integer labels under softmax(logits).
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

}  // namespace srgdiff::nn
