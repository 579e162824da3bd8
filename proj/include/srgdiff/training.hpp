// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "srgdiff/conditioning.hpp"
#include "srgdiff/diffusion.hpp"
#include "srgdiff/nn/adam.hpp"
#include "srgdiff/vae.hpp"

namespace srgdiff::training {

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double lambda_res = 1.0;
  double lambda_smm = 1e-2;
  double lambda_spec = 0.1;
  double lambda_kl = 1e-4;
  int patience = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::array<double, 3> train_terms{};  // stage 1: mse, spectral, kl; stage 2: diffusion, residual, smm
  std::array<double, 3> val_terms{};
  double seconds = 0.0;
};

struct TrainReport {
  int stage = 1;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;   // 1-based
  bool stopped_early = false;

  double best_val_loss() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Called after every epoch; handy for progress logging.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Optimizes the VAE objective with Adam, keeps the parameters of the best
/// validation epoch, and freezes them. `train` and `val` are B x C x L.
TrainReport stage1_train(vae::Vae& vae, const nn::Tensor& train, const nn::Tensor& val, const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

/// Fails with ConfigError unless every VAE parameter is frozen.
void require_frozen(const vae::Vae& vae);

/// Scaled encoder means of HD windows plus LD condition features.
struct LatentDataset {
  nn::Tensor z0;
  conditioning::ConditionFeatures cond;

  std::size_t size() const { return z0.empty() ? 0 : z0.dim(0); }
};

/// Encodes a paired batch with the frozen VAE. Latents (targets and the
/// condition latent) are multiplied by `latent_scale`.
LatentDataset encode_pairs(vae::Vae& vae, const Eigen::MatrixXd& channel_map, const nn::Tensor& hd,
                           const nn::Tensor& ld, double latent_scale, std::size_t chunk = 64);

/// Condition features of an LD batch with the latent multiplied by
/// `latent_scale`.
conditioning::ConditionFeatures encode_condition(vae::Vae& vae, const Eigen::MatrixXd& channel_map,
                                                 const nn::Tensor& ld, double latent_scale, std::size_t chunk = 64);

/// 1 / std of the encoder mean over `hd`.
double latent_scale_for(vae::Vae& vae, const nn::Tensor& hd, std::size_t chunk = 64);

struct SrModelConfig {
  bool residual_guidance = true;  // false: static-concatenation ablation
  conditioning::ResidualConvention convention = conditioning::ResidualConvention::kForwardGap;
  diffusion::UNetConfig unet;
  conditioning::ModuleConfig modules;
  /// During sampling, correct every clean-latent estimate with the predicted
  /// residual. Only meaningful with residual guidance.
  bool residual_steering = true;
  std::uint64_t seed = 2;
};

/// Builds a consistent model configuration for a VAE profile.
SrModelConfig make_sr_config(const vae::VaeConfig& vae, bool residual_guidance, int steps, std::size_t width = 64,
                             std::size_t emb_dim = 64, std::uint64_t seed = 2);

struct Prediction {
  nn::Var eps;
  nn::Var residual;  // raw module output (invalid for the ablation)
  nn::Var gamma;
  nn::Var beta;
};

/// Conditional noise predictor. With residual guidance the latent state is
/// corrected by the residual module, calibrated by step-aware modulation and
/// concatenated with the raw state and the condition latent; the ablation
/// concatenates only the raw state and the condition latent.
class SrModel {
 public:
  explicit SrModel(SrModelConfig config);

  const SrModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  Prediction forward(nn::Tape& tape, nn::Var z_t, const std::vector<int>& t, const conditioning::ConditionVars& c);

  nn::Tensor predict_eps(const nn::Tensor& z_t, int t, const conditioning::ConditionFeatures& c);

  /// Noise estimate used by the sampler. With residual steering the clean
  /// estimate x0 becomes sqrt(alpha_bar_t) x0 + Res_t and the returned noise
  /// is the one consistent with that estimate.
  nn::Tensor sampling_eps(const nn::Tensor& z_t, int t, const conditioning::ConditionFeatures& c,
                          const diffusion::NoiseSchedule& schedule);

  /// Residual added to the state for a raw module output under the
  /// configured sign convention.
  nn::Var applied_residual(nn::Var raw) const;
  /// Training label for the raw module output.
  nn::Tensor residual_label(const nn::Tensor& z0, const nn::Tensor& z_t) const;

 private:
  SrModelConfig config_;
  nn::ParamStore params_;
  diffusion::UNet unet_;
  std::unique_ptr<conditioning::ResidualDirectionModule> rdm_;
  std::unique_ptr<conditioning::StepAwareModulation> smm_;
};

struct Stage2Weights {
  double lambda_res = 1.0;
  double lambda_smm = 1e-2;
};

struct Stage2Loss {
  nn::Var total;
  nn::Var diffusion;
  nn::Var residual;
  nn::Var smm;
};

/// Weighted sum of the noise, residual, and modulation terms, each
/// element-normalized. Residual/modulation Vars may be invalid (zero term).
Stage2Loss stage2_objective(nn::Var eps_hat, nn::Var eps, nn::Var residual, nn::Var residual_label, nn::Var gamma,
                            nn::Var beta, const Stage2Weights& weights);

/// Samples t ~ U{1..T} and eps ~ N(0, I) from `rng`, noises z0 and scores
/// the model.
Stage2Loss stage2_loss(nn::Tape& tape, SrModel& model, const nn::Tensor& z0, const conditioning::ConditionFeatures& c,
                       const diffusion::NoiseSchedule& schedule, Rng& rng, const Stage2Weights& weights);

/// Optimizes the Stage-2 objective over the model parameters with early
/// stopping on validation loss; the best epoch's parameters are kept.
TrainReport stage2_train(const vae::Vae& vae, SrModel& model, const LatentDataset& train, const LatentDataset& val,
                         const diffusion::NoiseSchedule& schedule, const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

/// DDIM sampling of latents for every condition row, in chunks.
nn::Tensor sample_latents(SrModel& model, const conditioning::ConditionFeatures& c,
                          const diffusion::NoiseSchedule& schedule, const diffusion::SampleOptions& options,
                          std::size_t chunk = 50);

}  // namespace srgdiff::training
