// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/conditioning.hpp"

#include "srgdiff/diffusion.hpp"
#include "srgdiff/error.hpp"

namespace srgdiff::conditioning {

using nn::Tensor;
using nn::Var;

ConditionFeatures slice(const ConditionFeatures& c, std::size_t begin, std::size_t end) {
  ConditionFeatures out;
  for (const auto& s : c.stages) out.stages.push_back(s.slice_rows(begin, end));
  out.latent = c.latent.slice_rows(begin, end);
  return out;
}

ConditionFeatures gather(const ConditionFeatures& c, const std::vector<std::size_t>& rows) {
  ConditionFeatures out;
  for (const auto& s : c.stages) out.stages.push_back(nn::take_rows(s, rows));
  out.latent = nn::take_rows(c.latent, rows);
  return out;
}

Tensor apply_channel_map(const Eigen::MatrixXd& map, const Tensor& x) {
  if (x.rank() != 3 || static_cast<std::size_t>(map.cols()) != x.dim(1))
    throw ShapeError("channel map with " + std::to_string(map.cols()) + " inputs applied to " +
                     nn::to_string(x.shape()));
  const std::size_t b = x.dim(0), cin = x.dim(1), len = x.dim(2), cout = static_cast<std::size_t>(map.rows());
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Tensor out({b, cout, len});
  for (std::size_t i = 0; i < b; ++i) {
    Eigen::Map<const RowMat> xi(x.data() + i * cin * len, static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(len));
    Eigen::Map<RowMat> yi(out.data() + i * cout * len, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(len));
    yi.noalias() = map * xi;
  }
  return out;
}

ConditionFeatures extract_condition(vae::Vae& vae, const Eigen::MatrixXd& channel_map, const Tensor& ld) {
  Tensor lifted = apply_channel_map(channel_map, ld);
  if (lifted.dim(1) != vae.config().channels)
    throw ShapeError("channel map yields " + std::to_string(lifted.dim(1)) + " channels, encoder expects " +
                     std::to_string(vae.config().channels));
  nn::Tape tape;
  auto enc = vae.encode(tape, tape.constant(std::move(lifted)));
  ConditionFeatures out;
  for (const Var& s : enc.stages) out.stages.push_back(s.value());
  out.latent = enc.mu.value();
  return out;
}

Tensor residual_target(const Tensor& z0, const Tensor& z_t) {
  if (z0.shape() != z_t.shape())
    throw ShapeError("residual_target: " + nn::to_string(z0.shape()) + " vs " + nn::to_string(z_t.shape()));
  return z0 - z_t;
}

ConditionVars as_constants(nn::Tape& tape, const ConditionFeatures& c) {
  ConditionVars v;
  for (const auto& s : c.stages) v.stages.push_back(tape.constant(s));
  v.latent = tape.constant(c.latent);
  return v;
}

Var condition_stack(const ConditionVars& c) {
  const std::size_t len = c.latent.shape()[2];
  std::vector<Var> parts;
  for (const Var& s : c.stages) {
    const std::size_t sl = s.shape()[2];
    if (sl % len != 0) throw ShapeError("condition stage length " + std::to_string(sl) + " not a multiple of " +
                                        std::to_string(len));
    parts.push_back(nn::avg_pool1d(s, sl / len));
  }
  parts.push_back(c.latent);
  return nn::concat(parts);
}

namespace {

Var step_embedding(nn::Tape& tape, const std::vector<int>& t, std::size_t dim) {
  return tape.constant(diffusion::timestep_embeddings(t, dim));
}

}  // namespace

ResidualDirectionModule::ResidualDirectionModule(ModuleConfig config, nn::ParamStore& store, std::string prefix)
    : config_(config), store_(&store), prefix_(std::move(prefix)) {
  if (config_.condition_channels == 0) throw ConfigError("residual module needs condition channels");
  const std::string& p = prefix_;
  const std::size_t w = config_.width;
  nn::add_conv(store, p + ".c1", config_.condition_channels, w, 3);
  nn::add_dense(store, p + ".t1", config_.emb_dim, w, 1.0);
  nn::add_conv(store, p + ".c2", w, w, 3);
  nn::add_dense(store, p + ".t2", config_.emb_dim, w, 1.0);
  nn::add_conv(store, p + ".c3", w, config_.latent_channels, 3, 0.5);
}

Var ResidualDirectionModule::predict(nn::Tape& t, const ConditionVars& c, const std::vector<int>& steps) {
  auto& s = *store_;
  const std::string& p = prefix_;
  Var x = condition_stack(c);
  if (x.shape()[1] != config_.condition_channels)
    throw ShapeError("residual module expects " + std::to_string(config_.condition_channels) +
                     " condition channels, got " + nn::to_string(x.shape()));
  if (steps.size() != x.shape()[0]) throw ShapeError("residual module needs one timestep per batch row");
  Var e = step_embedding(t, steps, config_.emb_dim);
  Var h = nn::conv(t, s, p + ".c1", x);
  h = nn::silu(nn::add_channel_bias(h, nn::dense(t, s, p + ".t1", e)));
  h = nn::conv(t, s, p + ".c2", h);
  h = nn::silu(nn::add_channel_bias(h, nn::dense(t, s, p + ".t2", e)));
  return nn::conv(t, s, p + ".c3", h);
}

Var apply_rdm(Var z_t, Var residual) {
  if (z_t.shape() != residual.shape())
    throw ShapeError("apply_rdm: " + nn::to_string(z_t.shape()) + " vs " + nn::to_string(residual.shape()));
  return nn::add(nn::layer_norm(z_t, Var(), Var()), residual);
}

StepAwareModulation::StepAwareModulation(ModuleConfig config, nn::ParamStore& store, std::string prefix)
    : config_(config), store_(&store), prefix_(std::move(prefix)) {
  if (config_.condition_channels == 0) throw ConfigError("modulation module needs condition channels");
  const std::string& p = prefix_;
  const std::size_t w = config_.width, d = config_.emb_dim;
  nn::add_conv(store, p + ".enc1", config_.condition_channels, w, 3);
  nn::add_conv(store, p + ".enc2", w, d, 3, 1.0);
  auto& sigma = store.add_constant(sigma_name(), {1}, 1.0);
  sigma.lower = 0.0;
  sigma.upper = 1.0;
  for (const char* head : {".gamma", ".beta"}) {
    nn::add_dense(store, p + head + "1", 2 * d, w);
    nn::add_dense(store, p + head + "2", w, config_.latent_channels);
    store.get(p + head + "2.w").value.fill(0.0);
  }
}

Var StepAwareModulation::encode(nn::Tape& t, const ConditionVars& c) {
  auto& s = *store_;
  Var h = nn::silu(nn::conv(t, s, prefix_ + ".enc1", condition_stack(c)));
  return nn::mean_time(nn::conv(t, s, prefix_ + ".enc2", h));
}

std::vector<double> StepAwareModulation::decay(const std::vector<int>& steps) const {
  const double smax = std::clamp(store_->get(sigma_name()).value[0], 0.0, 1.0);
  std::vector<double> out;
  for (int v : steps) out.push_back(smax * (1.0 - static_cast<double>(v) / config_.steps));
  return out;
}

Var StepAwareModulation::fuse(nn::Tape& t, Var encoded, const std::vector<int>& steps) {
  if (encoded.shape() != nn::Shape{steps.size(), config_.emb_dim})
    throw ShapeError("fusion expects [" + std::to_string(steps.size()) + "x" + std::to_string(config_.emb_dim) +
                     "] condition embedding, got " + nn::to_string(encoded.shape()));
  std::vector<double> ramp;
  for (int v : steps) {
    if (v < 0 || v > config_.steps) throw RangeError("fusion timestep " + std::to_string(v) + " out of range");
    ramp.push_back(1.0 - static_cast<double>(v) / config_.steps);
  }
  Var e = step_embedding(t, steps, config_.emb_dim);
  Var sigma = nn::clamp(t.param(*store_, sigma_name()), 0.0, 1.0);
  return nn::add(e, nn::mul_scalar(nn::row_scale(nn::sub(encoded, e), ramp), sigma));
}

Modulation StepAwareModulation::modulate(nn::Tape& t, Var fused, const std::vector<int>& steps, Var state) {
  const nn::Shape& zs = state.shape();
  if (zs.size() != 3 || zs[0] != steps.size() || zs[1] != config_.latent_channels)
    throw ShapeError("modulation expects [" + std::to_string(steps.size()) + "x" +
                     std::to_string(config_.latent_channels) + "xL] state, got " + nn::to_string(zs));
  auto& s = *store_;
  const std::string& p = prefix_;
  Var in = nn::concat({fused, step_embedding(t, steps, config_.emb_dim)});
  Var g = nn::dense(t, s, p + ".gamma2", nn::silu(nn::dense(t, s, p + ".gamma1", in)));
  Var b = nn::dense(t, s, p + ".beta2", nn::silu(nn::dense(t, s, p + ".beta1", in)));
  Modulation out;
  out.gamma = nn::add_scalar(nn::tanh(g), 1.0);
  out.beta = b;
  out.state = nn::channel_affine(state, out.gamma, out.beta);
  return out;
}

Var residual_loss(const std::vector<Var>& predicted, const std::vector<Var>& targets) {
  if (predicted.empty()) throw ConfigError("residual loss over an empty batch");
  if (predicted.size() != targets.size()) throw ShapeError("residual loss needs matched prediction/target pairs");
  Var total;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    Var term = nn::mean_square(nn::sub(predicted[i], targets[i]));
    total = total.valid() ? nn::add(total, term) : term;
  }
  return nn::scale(total, 1.0 / static_cast<double>(predicted.size()));
}

Var modulation_penalty(Var gamma, Var beta) {
  return nn::add(nn::mean_square(nn::add_scalar(gamma, -1.0)), nn::mean_square(beta));
}

}  // namespace srgdiff::conditioning
