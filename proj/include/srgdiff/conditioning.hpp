// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "srgdiff/nn/layers.hpp"
#include "srgdiff/vae.hpp"

namespace srgdiff::conditioning {

/// Frozen-encoder features of a low-density batch: one map per
/// downsampling stage plus the latent mean.
struct ConditionFeatures {
  std::vector<nn::Tensor> stages;  // B x width x (length / 2^(s+1))
  nn::Tensor latent;               // B x latent_channels x latent_length
};

/// Slices rows [begin, end) of every feature tensor.
ConditionFeatures slice(const ConditionFeatures& c, std::size_t begin, std::size_t end);
/// Gathers the given batch rows.
ConditionFeatures gather(const ConditionFeatures& c, const std::vector<std::size_t>& rows);

/// Lifts an LD batch (B x C_L x L) to the encoder's C_H input channels with a
/// fixed C_H x C_L channel map, then runs the frozen encoder.
ConditionFeatures extract_condition(vae::Vae& vae, const Eigen::MatrixXd& channel_map, const nn::Tensor& ld);

/// Applies a C_out x C_in channel map to every time step of a batch.
nn::Tensor apply_channel_map(const Eigen::MatrixXd& map, const nn::Tensor& x);

/// Sign convention of the residual label.
enum class ResidualConvention {
  kForwardGap,        // z0 - z_t, added to the state as predicted
  kNoisingDirection,  // z_t - z0, predictor output negated before use
};

/// z0 - z_t.
nn::Tensor residual_target(const nn::Tensor& z0, const nn::Tensor& z_t);

struct ConditionVars {
  std::vector<nn::Var> stages;
  nn::Var latent;
};
ConditionVars as_constants(nn::Tape& tape, const ConditionFeatures& c);

/// Pools every stage to the latent length and concatenates with the latent
/// mean along channels.
nn::Var condition_stack(const ConditionVars& c);

struct ModuleConfig {
  std::size_t latent_channels = 8;
  std::size_t condition_channels = 0;  // channels of condition_stack
  std::size_t width = 64;
  std::size_t emb_dim = 64;
  std::size_t groups = 8;
  int steps = 1000;                    // diffusion horizon T
};

/// Lightweight convolutional predictor of the step residual from the
/// condition and the timestep.
class ResidualDirectionModule {
 public:
  ResidualDirectionModule(ModuleConfig config, nn::ParamStore& store, std::string prefix = "rdm");
  nn::Var predict(nn::Tape& tape, const ConditionVars& c, const std::vector<int>& t);

 private:
  ModuleConfig config_;
  nn::ParamStore* store_;
  std::string prefix_;
};

/// LayerNorm over the temporal axis (unit gain, zero bias) plus the residual.
nn::Var apply_rdm(nn::Var z_t, nn::Var residual);

struct Modulation {
  nn::Var state;  // gamma * z + beta
  nn::Var gamma;  // B x latent_channels
  nn::Var beta;   // B x latent_channels
};

/// Step-aware fusion of the condition embedding with the timestep embedding,
/// followed by a channel-wise affine calibration of the latent state.
class StepAwareModulation {
 public:
  StepAwareModulation(ModuleConfig config, nn::ParamStore& store, std::string prefix = "smm");

  /// Condition encoder: B x emb_dim.
  nn::Var encode(nn::Tape& tape, const ConditionVars& c);
  /// e_t + sigma_t (E(c) - e_t), sigma_t = clamp(sigma_max, 0, 1) (1 - t/T).
  nn::Var fuse(nn::Tape& tape, nn::Var encoded, const std::vector<int>& t);
  /// gamma = 1 + tanh(MLP_g([h, e_t])), beta = MLP_b([h, e_t]).
  Modulation modulate(nn::Tape& tape, nn::Var fused, const std::vector<int>& t, nn::Var state);

  /// Fusion weight sigma_t for each row.
  std::vector<double> decay(const std::vector<int>& t) const;

  std::string sigma_name() const { return prefix_ + ".sigma_max"; }

 private:
  ModuleConfig config_;
  nn::ParamStore* store_;
  std::string prefix_;
};

/// Mean over pairs of the element-normalized squared error.
nn::Var residual_loss(const std::vector<nn::Var>& predicted, const std::vector<nn::Var>& targets);

/// mean((gamma - 1)^2) + mean(beta^2).
nn::Var modulation_penalty(nn::Var gamma, nn::Var beta);

}  // namespace srgdiff::conditioning
