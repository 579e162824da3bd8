// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "srgdiff/diffusion.hpp"
#include "srgdiff/eval/metrics.hpp"
#include "srgdiff/training.hpp"
#include "srgdiff/vae.hpp"

namespace srgdiff::experiment {

struct DataConfig {
  std::size_t channels = 16;
  double fs = 200.0;
  double window_seconds = 1.0;
  std::size_t n_train = 2000;
  std::size_t n_val = 200;
  std::size_t n_test = 200;
  double amplitude_jitter = 0.3;
  double noise_amplitude = 0.1;
  /// Relative alpha/beta amplitude swing between the two classes.
  double class_contrast = 0.3;
  std::uint64_t mixing_seed = 7;

  std::size_t window_length() const;
  std::size_t total() const { return n_train + n_val + n_test; }
};

struct DiffusionConfig {
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::kCosine;
  int steps = 1000;
  double offset = 0.005;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int sample_steps = 50;
  double eta = 0.0;
  double clip = 3.0;

  diffusion::NoiseSchedule build() const;
};

struct SrConfig {
  double scale = 2.0;
  std::size_t width = 64;
  std::size_t emb_dim = 64;
  bool ablation = true;           // also train the static-concatenation model
  bool residual_steering = true;
  training::TrainConfig train;
};

struct EvalConfig {
  std::size_t embed_dim = 32;
  int embed_epochs = 20;
  int forest_trees = 100;
  bool masked_only = true;        // metrics over reconstructed channels only
  eval::SnrPooling snr_pooling = eval::SnrPooling::Window;
  std::string topomap_band = "alpha";
  std::vector<std::size_t> topomap_samples{0};
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  DataConfig data;
  vae::VaeConfig vae;
  training::TrainConfig vae_train;
  DiffusionConfig diffusion;
  SrConfig sr;
  EvalConfig eval;
  std::filesystem::path output_dir = "out";

  /// key = value text with [data], [vae], [diffusion], [sr], [eval] and
  /// [output] sections; `seed` may appear before the first section.
  /// Relative output paths resolve against `base_dir`.
  static ExperimentConfig parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
};

/// Where every stage reads and writes.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path vae() const { return root / "vae"; }
  std::filesystem::path model(bool guided) const { return root / (guided ? "srgdiff" : "ablation"); }
  std::filesystem::path recon() const { return root / "recon"; }
  std::filesystem::path recon_file(const std::string& method) const { return recon() / (method + ".tensor"); }
  std::filesystem::path eval() const { return root / "eval"; }
  std::filesystem::path metrics_csv() const { return eval() / "metrics.csv"; }
  std::filesystem::path summary() const { return eval() / "summary.txt"; }
  std::filesystem::path topomap() const { return root / "topomap"; }
};

/// Labelled synthetic corpus, all splits in one tensor.
struct Corpus {
  nn::Tensor hd;                // N x C x L, microvolts
  std::vector<int> labels;      // N
  ChannelLayout layout;
  DatasetManifest manifest;
  double fs = 0.0;
};

Corpus make_corpus(const ExperimentConfig& config);
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

/// Rows of the corpus in one split, in manifest id order.
nn::Tensor split_rows(const Corpus& corpus, Split split);
std::vector<int> split_labels(const Corpus& corpus, Split split);

/// HD x LD interpolation baselines and the learned pipeline share this.
std::vector<std::size_t> visible_channels(const ExperimentConfig& config, const ChannelLayout& layout);
std::vector<std::size_t> masked_channels(std::size_t channels, const std::vector<std::size_t>& visible);
nn::Tensor gather_channels(const nn::Tensor& x, const std::vector<std::size_t>& rows);

// ----------------------------------------------------------------- stages

/// Each stage returns the artifact paths it wrote.
std::vector<std::filesystem::path> run_synth(const ExperimentConfig& config);
std::vector<std::filesystem::path> run_train_vae(const ExperimentConfig& config);
std::vector<std::filesystem::path> run_train_sr(const ExperimentConfig& config);
std::vector<std::filesystem::path> run_superres(const ExperimentConfig& config);
std::vector<std::filesystem::path> run_eval(const ExperimentConfig& config);
std::vector<std::filesystem::path> run_topomap(const ExperimentConfig& config);

/// Methods written by superres, in CSV order.
const std::vector<std::string>& method_names(const ExperimentConfig& config);

// ---------------------------------------------------------------- outputs

inline constexpr const char* kMetricsHeader = "sample_id,scale,method,nmse,pcc,snr_db,eeg_fid,downstream_acc";

struct SampleMetrics {
  std::size_t sample_id = 0;
  eval::MetricsRecord metrics;
};

struct MethodResult {
  std::string method;
  double scale = 2.0;
  std::vector<SampleMetrics> samples;
  double eeg_fid = 0.0;
  double downstream_acc = 0.0;
};

/// Per-sample rows followed by MEAN and STD rows for every method.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MethodResult>& results);

struct SummaryRow {
  std::string method;
  std::string sample_id;
  double nmse = 0.0, pcc = 0.0, snr_db = 0.0;
  double eeg_fid = 0.0, downstream_acc = 0.0;
};
/// Aggregate (MEAN/STD) rows of a metrics CSV.
std::vector<SummaryRow> read_metrics_summary(const std::filesystem::path& path);

/// key = value pairs of the evaluation summary file.
std::map<std::string, double> read_summary(const std::filesystem::path& path);

}  // namespace srgdiff::experiment
