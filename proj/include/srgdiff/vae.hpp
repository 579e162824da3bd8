// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "srgdiff/nn/layers.hpp"
#include "srgdiff/random.hpp"

namespace srgdiff::vae {

struct VaeConfig {
  std::size_t channels = 16;        // HD input channels
  std::size_t length = 200;         // samples per window
  std::size_t latent_channels = 8;
  std::size_t width = 32;
  std::size_t stages = 2;           // stride-2 downsampling stages
  std::size_t groups = 8;
  bool attention = false;           // self-attention at the bottleneck
  double logvar_min = -30.0;
  double logvar_max = 20.0;
  std::uint64_t seed = 1;

  std::size_t latent_length() const { return length >> stages; }
  void validate() const;
};

struct EncoderOutput {
  nn::Var mu;
  nn::Var logvar;                 // clamped to [logvar_min, logvar_max]
  std::vector<nn::Var> stages;    // feature map after each downsampling stage
};

struct LossWeights {
  double spectral = 0.1;
  double kl = 1e-4;
};

struct VaeLoss {
  nn::Var total;
  nn::Var mse;
  nn::Var spectral;
  nn::Var kl;
};

/// STFT settings for the spectral reconstruction term on a window of
/// `length` samples.
struct SpectralLossConfig {
  std::size_t win_len;
  std::size_t fft_len;
  std::size_t hop;
};
SpectralLossConfig spectral_loss_config(std::size_t length);

class Vae {
 public:
  explicit Vae(VaeConfig config);

  const VaeConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// x: batch x channels x length.
  EncoderOutput encode(nn::Tape& tape, nn::Var x);
  /// z: batch x latent_channels x latent_length.
  nn::Var decode(nn::Tape& tape, nn::Var z);

 private:
  VaeConfig config_;
  nn::ParamStore params_;
};

/// z = mu + exp(logvar / 2) * eps with eps ~ N(0, I) drawn from `rng`.
nn::Var reparameterize(nn::Tape& tape, nn::Var mu, nn::Var logvar, Rng& rng);

/// Mean squared error + weighted spectral L1 + weighted element-normalized KL.
VaeLoss vae_loss(nn::Var x, nn::Var recon, nn::Var mu, nn::Var logvar, const LossWeights& weights = {});

/// Element-normalized KL(N(mu, exp(logvar)) || N(0, I)).
nn::Var kl_divergence(nn::Var mu, nn::Var logvar);

}  // namespace srgdiff::vae
