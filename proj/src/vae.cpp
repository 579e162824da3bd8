// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/vae.hpp"

#include <algorithm>

#include "srgdiff/error.hpp"
#include "srgdiff/spectral.hpp"

namespace srgdiff::vae {

using nn::Var;

void VaeConfig::validate() const {
  if (channels == 0 || length == 0 || latent_channels == 0 || width == 0)
    throw ConfigError("VAE dimensions must be positive");
  if (stages == 0 || length % (std::size_t{1} << stages) != 0)
    throw ConfigError("VAE window length " + std::to_string(length) + " not divisible by 2^" +
                      std::to_string(stages));
  if (!(logvar_min < logvar_max)) throw ConfigError("VAE logvar clamp range is empty");
}

SpectralLossConfig spectral_loss_config(std::size_t length) {
  const std::size_t win = std::min<std::size_t>(length, 200);
  return {win, spectral::next_power_of_two(std::max<std::size_t>(win, 256)), win};
}

Vae::Vae(VaeConfig config) : config_(config), params_(config.seed) {
  config_.validate();
  const std::size_t w = config_.width;
  auto& s = params_;
  nn::add_conv(s, "enc.in", config_.channels, w, 3);
  for (std::size_t i = 0; i < config_.stages; ++i) {
    const std::string p = "enc.s" + std::to_string(i);
    nn::add_conv(s, p + ".down", w, w, 3);
    nn::add_resblock(s, p + ".res", w, w);
  }
  if (config_.attention) nn::add_attention(s, "enc.attn", w);
  nn::add_norm(s, "enc.out_norm", w);
  nn::add_conv(s, "enc.mu", w, config_.latent_channels, 3, 1.0);
  nn::add_conv(s, "enc.logvar", w, config_.latent_channels, 3, 0.1);

  nn::add_conv(s, "dec.in", config_.latent_channels, w, 3);
  nn::add_resblock(s, "dec.mid", w, w);
  if (config_.attention) nn::add_attention(s, "dec.attn", w);
  for (std::size_t i = 0; i < config_.stages; ++i) {
    const std::string p = "dec.s" + std::to_string(i);
    nn::add_conv(s, p + ".up", w, w, 3);
    nn::add_resblock(s, p + ".res", w, w);
  }
  nn::add_norm(s, "dec.out_norm", w);
  nn::add_conv(s, "dec.out", w, config_.channels, 3, 1.0);
}

EncoderOutput Vae::encode(nn::Tape& t, Var x) {
  const nn::Shape& xs = x.shape();
  if (xs.size() != 3 || xs[1] != config_.channels || xs[2] != config_.length)
    throw ShapeError("VAE encoder expects [B x " + std::to_string(config_.channels) + " x " +
                     std::to_string(config_.length) + "], got " + nn::to_string(xs));
  auto& s = params_;
  const std::size_t g = config_.groups;
  EncoderOutput out;
  Var h = nn::conv(t, s, "enc.in", x);
  for (std::size_t i = 0; i < config_.stages; ++i) {
    const std::string p = "enc.s" + std::to_string(i);
    h = nn::conv(t, s, p + ".down", nn::silu(h), 2);
    h = nn::resblock(t, s, p + ".res", h, g);
    out.stages.push_back(h);
  }
  if (config_.attention) h = nn::attention(t, s, "enc.attn", h, g);
  h = nn::silu(nn::norm(t, s, "enc.out_norm", h, g));
  out.mu = nn::conv(t, s, "enc.mu", h);
  out.logvar = nn::clamp(nn::conv(t, s, "enc.logvar", h), config_.logvar_min, config_.logvar_max);
  return out;
}

Var Vae::decode(nn::Tape& t, Var z) {
  const nn::Shape& zs = z.shape();
  if (zs.size() != 3 || zs[1] != config_.latent_channels || zs[2] != config_.latent_length())
    throw ShapeError("VAE decoder expects [B x " + std::to_string(config_.latent_channels) + " x " +
                     std::to_string(config_.latent_length()) + "], got " + nn::to_string(zs));
  auto& s = params_;
  const std::size_t g = config_.groups;
  Var h = nn::conv(t, s, "dec.in", z);
  h = nn::resblock(t, s, "dec.mid", h, g);
  if (config_.attention) h = nn::attention(t, s, "dec.attn", h, g);
  for (std::size_t i = 0; i < config_.stages; ++i) {
    const std::string p = "dec.s" + std::to_string(i);
    h = nn::conv(t, s, p + ".up", nn::upsample2(h));
    h = nn::resblock(t, s, p + ".res", h, g);
  }
  h = nn::silu(nn::norm(t, s, "dec.out_norm", h, g));
  return nn::conv(t, s, "dec.out", h);
}

Var reparameterize(nn::Tape& t, Var mu, Var logvar, Rng& rng) {
  if (mu.shape() != logvar.shape())
    throw ShapeError("reparameterize: " + nn::to_string(mu.shape()) + " vs " + nn::to_string(logvar.shape()));
  Var eps = t.constant(nn::Tensor::randn(mu.shape(), rng));
  return nn::add(mu, nn::mul(nn::exp(nn::scale(logvar, 0.5)), eps));
}

Var kl_divergence(Var mu, Var logvar) {
  // 0.5 * mean(mu^2 + exp(logvar) - 1 - logvar)
  Var inner = nn::sub(nn::add(nn::square(mu), nn::exp(logvar)), nn::add_scalar(logvar, 1.0));
  return nn::scale(nn::mean(inner), 0.5);
}

VaeLoss vae_loss(Var x, Var recon, Var mu, Var logvar, const LossWeights& w) {
  if (x.shape() != recon.shape())
    throw ShapeError("vae_loss: input " + nn::to_string(x.shape()) + " vs reconstruction " +
                     nn::to_string(recon.shape()));
  VaeLoss out;
  out.mse = nn::mean_square(nn::sub(recon, x));
  const auto sc = spectral_loss_config(x.shape()[2]);
  out.spectral = nn::mean_abs(nn::sub(nn::stft_magnitude(recon, sc.win_len, sc.fft_len, sc.hop),
                                      nn::stft_magnitude(x, sc.win_len, sc.fft_len, sc.hop)));
  out.kl = kl_divergence(mu, logvar);
  out.total = nn::add(out.mse, nn::add(nn::scale(out.spectral, w.spectral), nn::scale(out.kl, w.kl)));
  return out;
}

}  // namespace srgdiff::vae
