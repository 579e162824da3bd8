// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/diffusion.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "srgdiff/error.hpp"

namespace srgdiff::diffusion {

using nn::Tensor;
using nn::Var;

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw ConfigError("unknown noise schedule '" + name + "' (expected linear or cosine)");
}

namespace {

NoiseSchedule from_betas(const std::vector<double>& beta) {
  NoiseSchedule s;
  s.steps = static_cast<int>(beta.size()) - 1;
  s.beta = beta;
  s.alpha.resize(beta.size());
  s.alpha_bar.resize(beta.size());
  s.alpha[0] = 1.0;
  s.alpha_bar[0] = 1.0;
  for (std::size_t t = 1; t < beta.size(); ++t) {
    s.alpha[t] = 1.0 - beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
  }
  return s;
}

void check_t(int t, const NoiseSchedule& s, int lo) {
  if (t < lo || t > s.steps)
    throw RangeError("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(s.steps) + "]");
}

}  // namespace

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("schedule needs at least one step");
  if (!(beta_start > 0 && beta_start <= beta_end && beta_end < 1))
    throw ConfigError("linear schedule requires 0 < beta_start <= beta_end < 1");
  std::vector<double> beta(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int t = 1; t <= steps; ++t)
    beta[t] = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * (t - 1) / (steps - 1);
  return from_betas(beta);
}

NoiseSchedule cosine_schedule(int steps, double offset) {
  if (steps < 1) throw ConfigError("schedule needs at least one step");
  if (!(offset > 0)) throw ConfigError("cosine schedule offset must be positive");
  auto f = [&](int t) {
    const double c = std::cos(((static_cast<double>(t) / steps + offset) / (1.0 + offset)) * std::numbers::pi / 2);
    return c * c;
  };
  const double f0 = f(0);
  std::vector<double> beta(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int t = 1; t <= steps; ++t) {
    const double prev = f(t - 1) / f0, cur = f(t) / f0;
    beta[t] = std::min(1.0 - cur / prev, kMaxBeta);
  }
  return from_betas(beta);
}

void write_schedule_csv(const NoiseSchedule& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write schedule CSV " + path.string());
  out.precision(17);
  out << "t,beta,alpha,alpha_bar\n";
  for (int t = 0; t <= s.steps; ++t) out << t << ',' << s.beta[t] << ',' << s.alpha[t] << ',' << s.alpha_bar[t] << '\n';
  if (!out) throw IoError("failed writing schedule CSV " + path.string());
}

Tensor forward_marginal(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& s) {
  check_t(t, s, 0);
  if (z0.shape() != eps.shape())
    throw ShapeError("forward_marginal: " + nn::to_string(z0.shape()) + " vs " + nn::to_string(eps.shape()));
  const double a = std::sqrt(s.alpha_bar[t]), b = std::sqrt(1.0 - s.alpha_bar[t]);
  Tensor out(z0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * eps[i];
  return out;
}

Tensor forward_step(const Tensor& z_prev, int t, const Tensor& noise, const NoiseSchedule& s) {
  check_t(t, s, 1);
  const double a = std::sqrt(s.alpha[t]), b = std::sqrt(s.beta[t]);
  Tensor out(z_prev.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z_prev[i] + b * noise[i];
  return out;
}

std::vector<double> timestep_embedding(double t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw ConfigError("timestep embedding dimension must be even and positive");
  std::vector<double> e(dim);
  for (std::size_t i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    e[2 * i] = std::sin(t * freq);
    e[2 * i + 1] = std::cos(t * freq);
  }
  return e;
}

Tensor timestep_embeddings(const std::vector<int>& t, std::size_t dim) {
  Tensor out({t.size(), dim});
  for (std::size_t b = 0; b < t.size(); ++b) {
    auto e = timestep_embedding(t[b], dim);
    std::copy(e.begin(), e.end(), out.data() + b * dim);
  }
  return out;
}

Tensor predict_x0(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& s) {
  check_t(t, s, 0);
  if (z_t.shape() != eps_hat.shape())
    throw ShapeError("predict_x0: " + nn::to_string(z_t.shape()) + " vs " + nn::to_string(eps_hat.shape()));
  const double a = std::sqrt(s.alpha_bar[t]), b = std::sqrt(1.0 - s.alpha_bar[t]);
  Tensor out(z_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (z_t[i] - b * eps_hat[i]) / a;
  return out;
}

Tensor ddim_step(const Tensor& z_t, const Tensor& eps_hat, int t, int t_prev, const NoiseSchedule& s,
                 const DdimOptions& opt, Rng* rng) {
  check_t(t, s, 1);
  check_t(t_prev, s, 0);
  if (t_prev >= t) throw RangeError("ddim_step requires t_prev < t, got " + std::to_string(t_prev) + " >= " +
                                    std::to_string(t));
  if (opt.eta < 0 || opt.eta > 1) throw ConfigError("ddim eta must lie in [0, 1]");
  Tensor x0 = predict_x0(z_t, eps_hat, t, s);
  if (opt.clip > 0)
    for (double& v : x0.values()) v = std::clamp(v, -opt.clip, opt.clip);
  const double ab = s.alpha_bar[t], abp = s.alpha_bar[t_prev];
  const double sigma = opt.eta * std::sqrt((1.0 - abp) / (1.0 - ab)) * std::sqrt(1.0 - ab / abp);
  const double dir = std::sqrt(std::max(0.0, 1.0 - abp - sigma * sigma));
  const double a = std::sqrt(abp);
  Tensor out(z_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + dir * eps_hat[i];
  if (sigma > 0) {
    if (!rng) throw ConfigError("stochastic ddim step needs a noise source");
    for (double& v : out.values()) v += sigma * rng->normal();
  }
  return out;
}

std::vector<int> sampling_timesteps(int steps, int count) {
  if (count < 1 || count > steps)
    throw ConfigError("sampling step count " + std::to_string(count) + " must lie in [1, " + std::to_string(steps) +
                      "]");
  const int stride = steps / count;
  std::vector<int> out;
  for (int i = count - 1; i >= 0; --i) out.push_back(1 + i * stride);
  return out;
}

Tensor sample_from(Tensor z, const NoiseSchedule& s, const SampleOptions& opt, const EpsPredictor& predictor) {
  if (!predictor) throw ConfigError("sampling requires a noise predictor");
  const auto ts = sampling_timesteps(s.steps, opt.steps);
  Rng rng(derive_seed(opt.seed, {0x5a4d}));
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i], t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    Tensor eps = predictor(z, t);
    z = ddim_step(z, eps, t, t_prev, s, opt.ddim, &rng);
  }
  return z;
}

Tensor sample(const nn::Shape& shape, const NoiseSchedule& s, const SampleOptions& opt, const EpsPredictor& predictor) {
  Rng rng(opt.seed);
  return sample_from(Tensor::randn(shape, rng), s, opt, predictor);
}

void UNetConfig::validate() const {
  if (in_channels == 0 || out_channels == 0 || width == 0 || levels == 0)
    throw ConfigError("U-Net dimensions must be positive");
  if (length % (std::size_t{1} << (levels - 1)) != 0)
    throw ConfigError("U-Net length " + std::to_string(length) + " not divisible by 2^" + std::to_string(levels - 1));
  if (emb_dim == 0 || emb_dim % 2 != 0) throw ConfigError("U-Net embedding dimension must be even");
}

UNet::UNet(UNetConfig config, nn::ParamStore& store, std::string prefix)
    : config_(config), store_(&store), prefix_(std::move(prefix)) {
  config_.validate();
  const std::string& p = prefix_;
  const std::size_t w = config_.width, e = config_.emb_dim;
  nn::add_dense(store, p + ".temb1", e, e);
  nn::add_dense(store, p + ".temb2", e, e);
  nn::add_conv(store, p + ".in", config_.in_channels, w, 3);
  for (std::size_t l = 0; l + 1 < config_.levels; ++l) {
    nn::add_resblock(store, p + ".down" + std::to_string(l), w, w, e);
    nn::add_conv(store, p + ".pool" + std::to_string(l), w, w, 3);
  }
  nn::add_resblock(store, p + ".mid1", w, w, e);
  if (config_.attention) nn::add_attention(store, p + ".attn", w);
  nn::add_resblock(store, p + ".mid2", w, w, e);
  for (std::size_t l = config_.levels - 1; l-- > 0;) {
    nn::add_conv(store, p + ".unpool" + std::to_string(l), w, w, 3);
    nn::add_resblock(store, p + ".up" + std::to_string(l), 2 * w, w, e);
  }
  nn::add_norm(store, p + ".out_norm", w);
  nn::add_conv(store, p + ".out", w, config_.out_channels, 3, 0.1);
}

Var UNet::forward(nn::Tape& t, Var x, const std::vector<int>& steps) {
  const nn::Shape& xs = x.shape();
  if (xs.size() != 3 || xs[1] != config_.in_channels || xs[2] != config_.length)
    throw ShapeError("U-Net expects [B x " + std::to_string(config_.in_channels) + " x " +
                     std::to_string(config_.length) + "], got " + nn::to_string(xs));
  if (steps.size() != xs[0]) throw ShapeError("U-Net needs one timestep per batch row");
  auto& s = *store_;
  const std::string& p = prefix_;
  const std::size_t g = config_.groups;
  Var e = t.constant(timestep_embeddings(steps, config_.emb_dim));
  e = nn::dense(t, s, p + ".temb2", nn::silu(nn::dense(t, s, p + ".temb1", e)));
  Var act = nn::silu(e);

  Var h = nn::conv(t, s, p + ".in", x);
  std::vector<Var> skips;
  for (std::size_t l = 0; l + 1 < config_.levels; ++l) {
    h = nn::resblock(t, s, p + ".down" + std::to_string(l), h, g, act);
    skips.push_back(h);
    h = nn::conv(t, s, p + ".pool" + std::to_string(l), h, 2);
  }
  h = nn::resblock(t, s, p + ".mid1", h, g, act);
  if (config_.attention) h = nn::attention(t, s, p + ".attn", h, g);
  h = nn::resblock(t, s, p + ".mid2", h, g, act);
  for (std::size_t l = config_.levels - 1; l-- > 0;) {
    h = nn::conv(t, s, p + ".unpool" + std::to_string(l), nn::upsample2(h));
    h = nn::concat({h, skips[l]});
    h = nn::resblock(t, s, p + ".up" + std::to_string(l), h, g, act);
  }
  h = nn::silu(nn::norm(t, s, p + ".out_norm", h, g));
  return nn::conv(t, s, p + ".out", h);
}

}  // namespace srgdiff::diffusion
