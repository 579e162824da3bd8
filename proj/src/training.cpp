// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <numeric>

#include "srgdiff/error.hpp"

namespace srgdiff::training {

using nn::Tensor;
using nn::Var;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  for (double l : {lambda_res, lambda_smm, lambda_spec, lambda_kl})
    if (!(l >= 0)) throw ConfigError("loss weights must be non-negative");
  if (patience < 1) throw ConfigError("early-stop patience must be >= 1");
}

double TrainReport::best_val_loss() const {
  if (best_epoch < 1 || best_epoch > static_cast<int>(epochs.size())) throw RangeError("report has no best epoch");
  return epochs[static_cast<std::size_t>(best_epoch) - 1].val_loss;
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training report " + path.string());
  const char* names = stage == 1 ? "mse,spectral,kl" : "diffusion,residual,smm";
  std::string train_cols, val_cols;
  std::stringstream ss(names);
  for (std::string n; std::getline(ss, n, ',');) {
    train_cols += ",train_" + n;
    val_cols += ",val_" + n;
  }
  out.precision(10);
  out << "epoch,train_loss,val_loss" << train_cols << val_cols << ",seconds,best\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss;
    for (double v : e.train_terms) out << ',' << v;
    for (double v : e.val_terms) out << ',' << v;
    out << ',' << e.seconds << ',' << (e.epoch == best_epoch ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("failed writing training report " + path.string());
}

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  return order;
}

void check_finite(double loss, int epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch));
}

struct Accumulator {
  double total = 0.0;
  std::array<double, 3> terms{};
  double weight = 0.0;

  void add(double w, double loss, const std::array<double, 3>& t) {
    total += w * loss;
    for (std::size_t i = 0; i < 3; ++i) terms[i] += w * t[i];
    weight += w;
  }
  double mean() const { return total / weight; }
  std::array<double, 3> mean_terms() const {
    auto out = terms;
    for (double& v : out) v /= weight;
    return out;
  }
};

double value_of(const Var& v) { return v.valid() ? v.value()[0] : 0.0; }

/// Shared loop: early stopping, best-parameter restore, timing.
template <typename TrainEpoch, typename ValEpoch>
TrainReport run_epochs(int stage, nn::ParamStore& store, const TrainConfig& cfg, TrainEpoch train_epoch,
                       ValEpoch val_epoch, const EpochCallback& on_epoch) {
  TrainReport report;
  report.stage = stage;
  nn::ParamStore best = store;
  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    Accumulator tr = train_epoch(epoch);
    rec.train_loss = tr.mean();
    rec.train_terms = tr.mean_terms();
    Accumulator va = val_epoch();
    rec.val_loss = va.mean();
    rec.val_terms = va.mean_terms();
    rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    report.epochs.push_back(rec);
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      report.best_epoch = epoch;
      best = store;
    }
    if (on_epoch) on_epoch(rec);
    if (epoch - report.best_epoch >= cfg.patience) {
      report.stopped_early = epoch < cfg.epochs;
      break;
    }
  }
  store = best;
  return report;
}

}  // namespace

TrainReport stage1_train(vae::Vae& model, const Tensor& train, const Tensor& val, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty() || train.dim(0) == 0) throw ConfigError("stage 1 needs a non-empty training split");
  if (val.empty() || val.dim(0) == 0) throw ConfigError("stage 1 needs a non-empty validation split");
  auto& store = model.params();
  store.set_frozen(false);
  nn::Adam opt({.lr = cfg.lr});
  const vae::LossWeights weights{cfg.lambda_spec, cfg.lambda_kl};
  const std::size_t n = train.dim(0);

  auto train_epoch = [&](int epoch) {
    Accumulator acc;
    const auto order = shuffled(n, derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t b = 0, start = 0; start < n; ++b, start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::vector<std::size_t> rows(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
      Rng rng(derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(epoch), b}));
      store.zero_grad();
      nn::Tape tape;
      Var x = tape.constant(nn::take_rows(train, rows));
      auto enc = model.encode(tape, x);
      Var recon = model.decode(tape, vae::reparameterize(tape, enc.mu, enc.logvar, rng));
      auto loss = vae::vae_loss(x, recon, enc.mu, enc.logvar, weights);
      check_finite(loss.total.value()[0], epoch, b);
      tape.backward(loss.total);
      opt.step(store);
      acc.add(static_cast<double>(rows.size()), loss.total.value()[0],
              {loss.mse.value()[0], loss.spectral.value()[0], loss.kl.value()[0]});
    }
    return acc;
  };
  auto val_epoch = [&]() {
    Accumulator acc;
    const std::size_t nv = val.dim(0), chunk = 64;
    for (std::size_t b = 0, start = 0; start < nv; ++b, start += chunk) {
      const std::size_t end = std::min(nv, start + chunk);
      Rng rng(derive_seed(cfg.seed, {3, b}));
      nn::Tape tape;
      Var x = tape.constant(val.slice_rows(start, end));
      auto enc = model.encode(tape, x);
      Var recon = model.decode(tape, vae::reparameterize(tape, enc.mu, enc.logvar, rng));
      auto loss = vae::vae_loss(x, recon, enc.mu, enc.logvar, weights);
      acc.add(static_cast<double>(end - start), loss.total.value()[0],
              {loss.mse.value()[0], loss.spectral.value()[0], loss.kl.value()[0]});
    }
    return acc;
  };
  TrainReport report = run_epochs(1, store, cfg, train_epoch, val_epoch, on_epoch);
  store.set_frozen(true);
  return report;
}

void require_frozen(const vae::Vae& model) {
  if (!model.params().all_frozen()) throw ConfigError("Stage-2 requires frozen Stage-1");
}

double latent_scale_for(vae::Vae& model, const Tensor& hd, std::size_t chunk) {
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < hd.dim(0); start += chunk) {
    nn::Tape tape;
    auto enc = model.encode(tape, tape.constant(hd.slice_rows(start, std::min(hd.dim(0), start + chunk))));
    for (double v : enc.mu.value().values()) {
      sum += v;
      sq += v * v;
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  const double var = sq / static_cast<double>(count) - mean * mean;
  if (!(var > 0)) throw NumericalError("encoder means have zero variance");
  return 1.0 / std::sqrt(var);
}

namespace {

Tensor concat_rows(const std::vector<Tensor>& parts) {
  nn::Shape shape = parts.front().shape();
  shape[0] = 0;
  for (const auto& p : parts) shape[0] += p.dim(0);
  Tensor out(shape);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy_n(p.data(), p.size(), out.data() + off);
    off += p.size();
  }
  return out;
}

}  // namespace

conditioning::ConditionFeatures encode_condition(vae::Vae& model, const Eigen::MatrixXd& channel_map, const Tensor& ld,
                                                 double latent_scale, std::size_t chunk) {
  require_frozen(model);
  if (ld.empty()) throw ShapeError("empty low-density batch");
  std::vector<Tensor> lat_parts;
  std::vector<std::vector<Tensor>> stage_parts;
  for (std::size_t start = 0; start < ld.dim(0); start += chunk) {
    auto c = conditioning::extract_condition(model, channel_map, ld.slice_rows(start, std::min(ld.dim(0), start + chunk)));
    lat_parts.push_back(c.latent * latent_scale);
    stage_parts.resize(c.stages.size());
    for (std::size_t s = 0; s < c.stages.size(); ++s) stage_parts[s].push_back(std::move(c.stages[s]));
  }
  conditioning::ConditionFeatures out;
  out.latent = concat_rows(lat_parts);
  for (const auto& sp : stage_parts) out.stages.push_back(concat_rows(sp));
  return out;
}

LatentDataset encode_pairs(vae::Vae& model, const Eigen::MatrixXd& channel_map, const Tensor& hd, const Tensor& ld,
                           double latent_scale, std::size_t chunk) {
  require_frozen(model);
  if (hd.dim(0) != ld.dim(0)) throw ShapeError("HD and LD batches differ in size");
  std::vector<Tensor> z_parts;
  for (std::size_t start = 0; start < hd.dim(0); start += chunk) {
    nn::Tape tape;
    auto enc = model.encode(tape, tape.constant(hd.slice_rows(start, std::min(hd.dim(0), start + chunk))));
    z_parts.push_back(enc.mu.value() * latent_scale);
  }
  LatentDataset out;
  out.z0 = concat_rows(z_parts);
  out.cond = encode_condition(model, channel_map, ld, latent_scale, chunk);
  return out;
}


SrModelConfig make_sr_config(const vae::VaeConfig& v, bool residual_guidance, int steps, std::size_t width,
                             std::size_t emb_dim, std::uint64_t seed) {
  SrModelConfig c;
  c.residual_guidance = residual_guidance;
  c.seed = seed;
  c.unet.in_channels = (residual_guidance ? 3 : 2) * v.latent_channels;
  c.unet.out_channels = v.latent_channels;
  c.unet.length = v.latent_length();
  c.unet.width = width;
  c.unet.emb_dim = emb_dim;
  c.unet.groups = v.groups;
  c.unet.levels = (v.latent_length() % 2 == 0) ? 2 : 1;
  c.modules.latent_channels = v.latent_channels;
  c.modules.condition_channels = v.stages * v.width + v.latent_channels;
  c.modules.width = width;
  c.modules.emb_dim = emb_dim;
  c.modules.groups = v.groups;
  c.modules.steps = steps;
  return c;
}

SrModel::SrModel(SrModelConfig config)
    : config_(std::move(config)), params_(config_.seed), unet_(config_.unet, params_, "unet") {
  const std::size_t expect = (config_.residual_guidance ? 3 : 2) * config_.modules.latent_channels;
  if (config_.unet.in_channels != expect)
    throw ConfigError("denoiser input channels " + std::to_string(config_.unet.in_channels) + " do not match " +
                      std::to_string(expect));
  if (config_.residual_guidance) {
    rdm_ = std::make_unique<conditioning::ResidualDirectionModule>(config_.modules, params_, "rdm");
    smm_ = std::make_unique<conditioning::StepAwareModulation>(config_.modules, params_, "smm");
  }
}

Var SrModel::applied_residual(Var raw) const {
  return config_.convention == conditioning::ResidualConvention::kForwardGap ? raw : nn::scale(raw, -1.0);
}

Tensor SrModel::residual_label(const Tensor& z0, const Tensor& z_t) const {
  Tensor gap = conditioning::residual_target(z0, z_t);
  if (config_.convention == conditioning::ResidualConvention::kNoisingDirection) gap *= -1.0;
  return gap;
}

Prediction SrModel::forward(nn::Tape& t, Var z_t, const std::vector<int>& steps, const conditioning::ConditionVars& c) {
  Prediction out;
  if (!config_.residual_guidance) {
    out.eps = unet_.forward(t, nn::concat({z_t, c.latent}), steps);
    return out;
  }
  out.residual = rdm_->predict(t, c, steps);
  Var corrected = conditioning::apply_rdm(z_t, applied_residual(out.residual));
  Var fused = smm_->fuse(t, smm_->encode(t, c), steps);
  auto mod = smm_->modulate(t, fused, steps, corrected);
  out.gamma = mod.gamma;
  out.beta = mod.beta;
  out.eps = unet_.forward(t, nn::concat({z_t, mod.state, c.latent}), steps);
  return out;
}

Tensor SrModel::predict_eps(const Tensor& z_t, int t, const conditioning::ConditionFeatures& c) {
  nn::Tape tape;
  std::vector<int> steps(z_t.dim(0), t);
  return forward(tape, tape.constant(z_t), steps, conditioning::as_constants(tape, c)).eps.value();
}

Tensor SrModel::sampling_eps(const Tensor& z_t, int t, const conditioning::ConditionFeatures& c,
                             const diffusion::NoiseSchedule& schedule) {
  nn::Tape tape;
  std::vector<int> steps(z_t.dim(0), t);
  Prediction p = forward(tape, tape.constant(z_t), steps, conditioning::as_constants(tape, c));
  Tensor eps = p.eps.value();
  if (!config_.residual_guidance || !config_.residual_steering || t <= 0 || t > schedule.steps) return eps;
  const Tensor& res = applied_residual(p.residual).value();
  const double a = std::sqrt(schedule.alpha_bar[t]), b = std::sqrt(1.0 - schedule.alpha_bar[t]);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double x0 = (z_t[i] - b * eps[i]) / a;
    eps[i] = (z_t[i] - a * (a * x0 + res[i])) / b;
  }
  return eps;
}

Stage2Loss stage2_objective(Var eps_hat, Var eps, Var residual, Var residual_label, Var gamma, Var beta,
                            const Stage2Weights& w) {
  Stage2Loss out;
  out.diffusion = nn::mean_square(nn::sub(eps_hat, eps));
  out.total = out.diffusion;
  if (residual.valid()) {
    out.residual = conditioning::residual_loss({residual}, {residual_label});
    out.total = nn::add(out.total, nn::scale(out.residual, w.lambda_res));
  }
  if (gamma.valid()) {
    out.smm = conditioning::modulation_penalty(gamma, beta);
    out.total = nn::add(out.total, nn::scale(out.smm, w.lambda_smm));
  }
  return out;
}

Stage2Loss stage2_loss(nn::Tape& tape, SrModel& model, const Tensor& z0, const conditioning::ConditionFeatures& c,
                       const diffusion::NoiseSchedule& schedule, Rng& rng, const Stage2Weights& w) {
  const std::size_t b = z0.dim(0);
  const std::size_t row = z0.size() / b;
  std::vector<int> steps(b);
  for (int& s : steps) s = static_cast<int>(rng.integer(1, schedule.steps));
  Tensor eps = Tensor::randn(z0.shape(), rng);
  Tensor z_t(z0.shape());
  for (std::size_t i = 0; i < b; ++i) {
    const double a = std::sqrt(schedule.alpha_bar[steps[i]]), s = std::sqrt(1.0 - schedule.alpha_bar[steps[i]]);
    for (std::size_t j = 0; j < row; ++j) z_t[i * row + j] = a * z0[i * row + j] + s * eps[i * row + j];
  }
  Var zt = tape.constant(z_t);
  Prediction p = model.forward(tape, zt, steps, conditioning::as_constants(tape, c));
  Var label = p.residual.valid() ? tape.constant(model.residual_label(z0, z_t)) : Var();
  Stage2Weights weights = w;
  if (!model.config().residual_guidance) weights = {0.0, 0.0};
  return stage2_objective(p.eps, tape.constant(eps), p.residual, label, p.gamma, p.beta, weights);
}

TrainReport stage2_train(const vae::Vae& vae_model, SrModel& model, const LatentDataset& train,
                         const LatentDataset& val, const diffusion::NoiseSchedule& schedule, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
  require_frozen(vae_model);
  cfg.validate();
  if (train.size() == 0) throw ConfigError("stage 2 needs a non-empty training split");
  if (val.size() == 0) throw ConfigError("stage 2 needs a non-empty validation split");
  auto& store = model.params();
  nn::Adam opt({.lr = cfg.lr});
  const Stage2Weights weights{cfg.lambda_res, cfg.lambda_smm};
  const std::size_t n = train.size();
  auto terms = [](const Stage2Loss& l) {
    return std::array<double, 3>{value_of(l.diffusion), value_of(l.residual), value_of(l.smm)};
  };

  auto train_epoch = [&](int epoch) {
    Accumulator acc;
    const auto order = shuffled(n, derive_seed(cfg.seed, {11, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t b = 0, start = 0; start < n; ++b, start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::vector<std::size_t> rows(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
      Rng rng(derive_seed(cfg.seed, {12, static_cast<std::uint64_t>(epoch), b}));
      store.zero_grad();
      nn::Tape tape;
      auto loss = stage2_loss(tape, model, nn::take_rows(train.z0, rows), conditioning::gather(train.cond, rows),
                              schedule, rng, weights);
      check_finite(loss.total.value()[0], epoch, b);
      tape.backward(loss.total);
      opt.step(store);
      acc.add(static_cast<double>(rows.size()), loss.total.value()[0], terms(loss));
    }
    return acc;
  };
  auto val_epoch = [&]() {
    Accumulator acc;
    const std::size_t nv = val.size(), chunk = 50;
    for (std::size_t b = 0, start = 0; start < nv; ++b, start += chunk) {
      const std::size_t end = std::min(nv, start + chunk);
      Rng rng(derive_seed(cfg.seed, {13, b}));
      nn::Tape tape;
      auto loss = stage2_loss(tape, model, val.z0.slice_rows(start, end), conditioning::slice(val.cond, start, end),
                              schedule, rng, weights);
      acc.add(static_cast<double>(end - start), loss.total.value()[0], terms(loss));
    }
    return acc;
  };
  return run_epochs(2, store, cfg, train_epoch, val_epoch, on_epoch);
}

Tensor sample_latents(SrModel& model, const conditioning::ConditionFeatures& c, const diffusion::NoiseSchedule& schedule,
                      const diffusion::SampleOptions& options, std::size_t chunk) {
  const std::size_t n = c.latent.dim(0);
  nn::Shape row_shape = c.latent.shape();
  row_shape[0] = 1;
  row_shape[1] = model.config().unet.out_channels;
  nn::Shape shape = row_shape;
  shape[0] = n;
  Tensor out(shape);
  const std::size_t row = out.size() / n;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    nn::Shape cs = row_shape;
    cs[0] = end - start;
    Tensor z(cs);
    for (std::size_t i = start; i < end; ++i) {
      Rng rng(derive_seed(options.seed, {21, i}));
      for (std::size_t j = 0; j < row; ++j) z[(i - start) * row + j] = rng.normal();
    }
    auto cond = conditioning::slice(c, start, end);
    diffusion::SampleOptions opt = options;
    opt.seed = derive_seed(options.seed, {22, start});
    Tensor zs = diffusion::sample_from(std::move(z), schedule, opt,
                                       [&](const Tensor& zt, int t) { return model.sampling_eps(zt, t, cond, schedule); });
    std::copy_n(zs.data(), zs.size(), out.data() + start * row);
  }
  return out;
}

}  // namespace srgdiff::training
