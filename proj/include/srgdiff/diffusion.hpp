// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "srgdiff/nn/layers.hpp"
#include "srgdiff/random.hpp"

namespace srgdiff::diffusion {

enum class ScheduleKind { kLinear, kCosine };

ScheduleKind parse_schedule_kind(const std::string& name);

/// Arrays are indexed by t = 0..T; beta[0] = 0 and alpha_bar[0] = 1.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
};

inline constexpr double kMaxBeta = 0.999;

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end);
/// betas clipped to kMaxBeta; alpha_bar is the running product of the
/// clipped alphas so it stays strictly positive.
NoiseSchedule cosine_schedule(int steps, double offset);

void write_schedule_csv(const NoiseSchedule& schedule, const std::filesystem::path& path);

/// sqrt(alpha_bar[t]) z0 + sqrt(1 - alpha_bar[t]) eps, t in 0..T.
nn::Tensor forward_marginal(const nn::Tensor& z0, int t, const nn::Tensor& eps, const NoiseSchedule& schedule);

/// One Markov step z_{t-1} -> z_t with fresh noise.
nn::Tensor forward_step(const nn::Tensor& z_prev, int t, const nn::Tensor& noise, const NoiseSchedule& schedule);

/// Interleaved [sin(t f_0), cos(t f_0), sin(t f_1), ...] with
/// f_i = 10000^(-2i/dim).
std::vector<double> timestep_embedding(double t, std::size_t dim);
/// batch x dim table of embeddings.
nn::Tensor timestep_embeddings(const std::vector<int>& t, std::size_t dim);

nn::Tensor predict_x0(const nn::Tensor& z_t, const nn::Tensor& eps_hat, int t, const NoiseSchedule& schedule);

struct DdimOptions {
  double eta = 0.0;
  double clip = 0.0;  // clamp for the x0 estimate; 0 disables
};

/// Deterministic for eta = 0; otherwise `rng` supplies the fresh noise.
nn::Tensor ddim_step(const nn::Tensor& z_t, const nn::Tensor& eps_hat, int t, int t_prev,
                     const NoiseSchedule& schedule, const DdimOptions& options = {}, Rng* rng = nullptr);

/// Descending visiting order t_0 > t_1 > ... > 0 for `count` model calls.
/// Uniform stride T/count starting from 1; count == T gives T, T-1, ..., 1.
std::vector<int> sampling_timesteps(int steps, int count);

/// Predicts noise for a batch of latents at a common timestep.
using EpsPredictor = std::function<nn::Tensor(const nn::Tensor& z_t, int t)>;

struct SampleOptions {
  int steps = 50;
  DdimOptions ddim;
  std::uint64_t seed = 0;
};

/// Starts from seeded N(0, I) and walks the strided sub-schedule to t = 0.
nn::Tensor sample(const nn::Shape& shape, const NoiseSchedule& schedule, const SampleOptions& options,
                  const EpsPredictor& predictor);

/// As `sample` but starting from an explicit z_T.
nn::Tensor sample_from(nn::Tensor z, const NoiseSchedule& schedule, const SampleOptions& options,
                       const EpsPredictor& predictor);

struct UNetConfig {
  std::size_t in_channels = 8;
  std::size_t out_channels = 8;
  std::size_t length = 50;
  std::size_t width = 64;
  std::size_t levels = 2;      // resolutions: length, length/2, ...
  std::size_t emb_dim = 64;
  std::size_t groups = 8;
  bool attention = false;      // self-attention at the bottleneck

  void validate() const;
};

/// 1D U-Net noise predictor: stride-2 encoder, bottleneck, nearest-upsample
/// decoder with skip concatenation; the timestep embedding enters every
/// residual block as a per-channel bias.
class UNet {
 public:
  UNet(UNetConfig config, nn::ParamStore& store, std::string prefix = "unet");

  const UNetConfig& config() const { return config_; }

  /// x: batch x in_channels x length; t: one timestep per batch row.
  nn::Var forward(nn::Tape& tape, nn::Var x, const std::vector<int>& t);

 private:
  UNetConfig config_;
  nn::ParamStore* store_;
  std::string prefix_;
};

}  // namespace srgdiff::diffusion
