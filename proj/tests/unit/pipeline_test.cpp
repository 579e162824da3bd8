// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "srgdiff/error.hpp"
#include "srgdiff/experiment.hpp"
#include "srgdiff/spectral.hpp"
#include "srgdiff/srgdiff.h"

namespace fs = std::filesystem;
using namespace srgdiff;
using namespace srgdiff::experiment;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("srgdiff_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream f(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kTinyConfig = R"(seed = 3
[data]
train = 12
val = 4
test = 4
[vae]
latent_channels = 2
width = 4
groups = 2
epochs = 1
[diffusion]
steps = 50
sample_steps = 5
[sr]
width = 4
emb_dim = 4
epochs = 1
[eval]
embed_dim = 4
embed_epochs = 1
forest_trees = 3
)";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SRGDIFF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

MethodResult result_of(const std::string& method, std::vector<double> nmse) {
  MethodResult r;
  r.method = method;
  for (std::size_t i = 0; i < nmse.size(); ++i) r.samples.push_back({i, {nmse[i], 0.5 + 0.1 * i, 10.0 - i}});
  r.eeg_fid = 1.25;
  r.downstream_acc = 0.75;
  return r;
}

}  // namespace

// ------------------------------------------------------------- metrics CSV

TEST(MetricsCsv, OneRecordGivesHeaderDataAndTwoSummaryRows) {
  const fs::path path = scratch("csv1") / "m.csv";
  write_metrics_csv(path, {result_of("idw", {0.4})});
  const auto lines = read_lines(path);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(split_csv(lines[1])[0], "0");
  EXPECT_EQ(split_csv(lines[2])[0], "MEAN");
  EXPECT_EQ(split_csv(lines[3])[0], "STD");
}

TEST(MetricsCsv, HeaderIsExact) {
  const fs::path path = scratch("csv2") / "m.csv";
  write_metrics_csv(path, {result_of("idw", {0.4, 0.2})});
  EXPECT_EQ(read_lines(path).at(0), "sample_id,scale,method,nmse,pcc,snr_db,eeg_fid,downstream_acc");
}

TEST(MetricsCsv, MeanRowIsArithmeticMean) {
  const fs::path path = scratch("csv3") / "m.csv";
  const std::vector<double> nmse{0.1, 0.35, 0.2, 0.7};
  write_metrics_csv(path, {result_of("srgdiff", nmse)});
  const auto lines = read_lines(path);
  std::vector<double> sums(3, 0.0);
  double mean_row[3] = {};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv(lines[i]);
    ASSERT_EQ(f.size(), 8u);
    for (int k = 0; k < 3; ++k) {
      if (f[0] == "MEAN") mean_row[k] = std::stod(f[3 + k]);
      else if (f[0] != "STD") sums[k] += std::stod(f[3 + k]);
    }
  }
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(mean_row[k], sums[k] / nmse.size(), 1e-9);
}

TEST(MetricsCsv, FeatureColumnsOnlyOnAggregateRows) {
  const fs::path path = scratch("csv4") / "m.csv";
  write_metrics_csv(path, {result_of("srgdiff", {0.1, 0.2}), result_of("idw", {0.5, 0.6})});
  for (const auto& line : read_lines(path)) {
    const auto f = split_csv(line);
    ASSERT_EQ(f.size(), 8u) << line;
    if (f[0] == "sample_id") continue;
    if (f[0] == "MEAN") {
      EXPECT_DOUBLE_EQ(std::stod(f[6]), 1.25);
      EXPECT_DOUBLE_EQ(std::stod(f[7]), 0.75);
    } else if (f[0] != "STD") {
      EXPECT_TRUE(f[6].empty() && f[7].empty()) << line;
    }
  }
}

TEST(MetricsCsv, SummaryRowsReadBack) {
  const fs::path path = scratch("csv5") / "m.csv";
  write_metrics_csv(path, {result_of("srgdiff", {0.1, 0.3})});
  const auto rows = read_metrics_summary(path);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].sample_id, "MEAN");
  EXPECT_EQ(rows[0].method, "srgdiff");
  EXPECT_NEAR(rows[0].nmse, 0.2, 1e-12);
  EXPECT_NEAR(rows[1].nmse, 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(rows[0].eeg_fid, 1.25);
}

TEST(MetricsCsv, EmptyRecordsRejected) {
  EXPECT_THROW(write_metrics_csv(scratch("csv6") / "m.csv", {}), ConfigError);
  EXPECT_THROW(write_metrics_csv(scratch("csv7") / "m.csv", {result_of("idw", {})}), ConfigError);
}

// ------------------------------------------------------------------ config

TEST(ExperimentConfig, DefaultsMatchDeskProfile) {
  const auto c = ExperimentConfig::parse("");
  EXPECT_EQ(c.data.channels, 16u);
  EXPECT_EQ(c.data.window_length(), 200u);
  EXPECT_EQ(c.data.n_train, 2000u);
  EXPECT_EQ(c.data.n_test, 200u);
  EXPECT_EQ(c.sr.scale, 2.0);
  EXPECT_EQ(c.eval.embed_dim, 32u);
  EXPECT_EQ(c.vae.channels, 16u);
}

TEST(ExperimentConfig, ParsesSectionsAndLists) {
  const auto c = ExperimentConfig::parse(kTinyConfig);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.data.n_train, 12u);
  EXPECT_EQ(c.vae.latent_channels, 2u);
  EXPECT_EQ(c.diffusion.steps, 50);
  EXPECT_EQ(c.sr.train.epochs, 1);
  const auto d = ExperimentConfig::parse("[eval]\ntopomap_samples = 1, 3,5\n");
  EXPECT_EQ(d.eval.topomap_samples, (std::vector<std::size_t>{1, 3, 5}));
  EXPECT_EQ(c.eval.snr_pooling, eval::SnrPooling::Window);
  EXPECT_EQ(ExperimentConfig::parse("[eval]\nsnr_pooling = channel\n").eval.snr_pooling, eval::SnrPooling::Channel);
}

TEST(ExperimentConfig, RejectsBadInput) {
  EXPECT_THROW(ExperimentConfig::parse("[sr]\nscale = 3\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[sr]\nscale = two\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[sr]\nspeed = 2\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[nonsense]\nx = 1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[data\nx = 1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[data]\ntest = 2\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[vae]\nstages = 4\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[diffusion]\nsample_steps = 2000\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[eval]\ntopomap_band = mu\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[eval]\nsnr_pooling = sample\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::load("/nonexistent/config.ini"), ConfigError);
}

TEST(ExperimentConfig, RelativeOutputResolvesAgainstConfigDirectory) {
  const fs::path dir = scratch("cfg");
  std::ofstream(dir / "run.ini") << "[output]\ndir = results\n";
  EXPECT_EQ(ExperimentConfig::load(dir / "run.ini").output_dir, dir / "results");
  EXPECT_EQ(ExperimentConfig::parse("[output]\ndir = /abs/out\n", dir).output_dir, fs::path("/abs/out"));
}

// ------------------------------------------------------------------ corpus

TEST(Corpus, DeterministicAndBalanced) {
  const auto cfg = ExperimentConfig::parse(kTinyConfig);
  const Corpus a = make_corpus(cfg), b = make_corpus(cfg);
  EXPECT_EQ(a.hd.storage(), b.hd.storage());
  EXPECT_EQ(a.hd.shape(), (nn::Shape{20, 16, 200}));
  EXPECT_EQ(a.manifest.ids(Split::kTrain).size(), 12u);
  EXPECT_EQ(a.manifest.ids(Split::kVal).size(), 4u);
  EXPECT_EQ(a.manifest.ids(Split::kTest).size(), 4u);
  const int ones = std::accumulate(a.labels.begin(), a.labels.end(), 0);
  EXPECT_EQ(ones, 10);
}

TEST(Corpus, ClassesDifferInAlphaAndBetaPower) {
  auto cfg = ExperimentConfig::parse(kTinyConfig);
  cfg.data.n_train = 40;
  const Corpus c = make_corpus(cfg);
  const auto& bands = spectral::canonical_bands();
  auto band_index = [&](const std::string& name) {
    return std::find_if(bands.begin(), bands.end(), [&](const auto& b) { return b.name == name; }) - bands.begin();
  };
  double alpha[2] = {}, beta[2] = {};
  for (std::size_t i = 0; i < c.labels.size(); ++i) {
    Signal s(16, 200);
    std::copy_n(c.hd.data() + i * 16 * 200, 16 * 200, s.data());
    const Eigen::MatrixXd p = spectral::psd_feature(EegWindow(s, c.fs, c.layout));
    alpha[c.labels[i]] += p.col(band_index("alpha")).mean();
    beta[c.labels[i]] += p.col(band_index("beta")).mean();
  }
  EXPECT_GT(alpha[0], 1.5 * alpha[1]);
  EXPECT_GT(beta[1], 1.5 * beta[0]);
}

TEST(Corpus, SaveLoadRoundTripIsExact) {
  const auto cfg = ExperimentConfig::parse(kTinyConfig);
  const Corpus a = make_corpus(cfg);
  const fs::path dir = scratch("corpus");
  save_corpus(a, dir);
  const Corpus b = load_corpus(dir);
  EXPECT_EQ(a.hd.storage(), b.hd.storage());
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.layout, b.layout);
  EXPECT_EQ(a.manifest.serialize(), b.manifest.serialize());
  EXPECT_EQ(a.fs, b.fs);
}

TEST(Corpus, ChannelHelpers) {
  EXPECT_EQ(masked_channels(5, {0, 3}), (std::vector<std::size_t>{1, 2, 4}));
  nn::Tensor x({1, 3, 2}, {1, 2, 3, 4, 5, 6});
  const nn::Tensor g = gather_channels(x, {2, 0});
  EXPECT_EQ(g.storage(), (std::vector<double>{5, 6, 1, 2}));
  EXPECT_THROW(gather_channels(x, {3}), ShapeError);
  const auto cfg = ExperimentConfig::parse("");
  EXPECT_EQ(visible_channels(cfg, ChannelLayout::spiral(16)).size(), 8u);
}

// ------------------------------------------------------------------ stages

TEST(Stages, EvalWithoutSuperresIsConfigError) {
  auto cfg = ExperimentConfig::parse(kTinyConfig);
  cfg.output_dir = scratch("noeval");
  run_synth(cfg);
  try {
    run_eval(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("missing reconstructions"), std::string::npos);
  }
}

TEST(Stages, TrainBeforeSynthIsConfigError) {
  auto cfg = ExperimentConfig::parse(kTinyConfig);
  cfg.output_dir = scratch("nosynth");
  EXPECT_THROW(run_train_vae(cfg), ConfigError);
  run_synth(cfg);
  EXPECT_THROW(run_train_sr(cfg), ConfigError);
}

// ------------------------------------------------------------------- C API

TEST(CApi, StatusAndExitCodes) {
  srgdiff_config* cfg = nullptr;
  EXPECT_EQ(srgdiff_config_parse("[sr]\nscale = 3\n", nullptr, &cfg), SRGDIFF_ERR_CONFIG);
  EXPECT_EQ(cfg, nullptr);
  EXPECT_NE(std::string(srgdiff_last_error()).find("scale"), std::string::npos);
  EXPECT_EQ(srgdiff_config_parse(kTinyConfig, nullptr, &cfg), SRGDIFF_OK);
  EXPECT_STREQ(srgdiff_last_error(), "");
  EXPECT_EQ(srgdiff_run_stage(cfg, "bogus", nullptr), SRGDIFF_ERR_CONFIG);
  EXPECT_EQ(srgdiff_run_stage(nullptr, "synth", nullptr), SRGDIFF_ERR_ARGUMENT);
  double v = 0.0;
  const std::string out = scratch("capi").string();
  EXPECT_EQ(srgdiff_config_set_output_dir(cfg, out.c_str()), SRGDIFF_OK);
  EXPECT_STREQ(srgdiff_config_output_dir(cfg), out.c_str());
  EXPECT_EQ(srgdiff_summary_value(cfg, "fid_real_halves", &v), SRGDIFF_ERR_CONFIG);
  srgdiff_artifacts* artifacts = nullptr;
  ASSERT_EQ(srgdiff_run_stage(cfg, "synth", &artifacts), SRGDIFF_OK);
  EXPECT_EQ(srgdiff_artifacts_count(artifacts), 5u);
  for (size_t i = 0; i < srgdiff_artifacts_count(artifacts); ++i)
    EXPECT_GT(fs::file_size(srgdiff_artifacts_path(artifacts, i)), 0u);
  EXPECT_EQ(srgdiff_artifacts_path(artifacts, 99), nullptr);
  srgdiff_artifacts_free(artifacts);
  srgdiff_config_free(cfg);

  EXPECT_EQ(srgdiff_exit_code(SRGDIFF_OK), 0);
  EXPECT_EQ(srgdiff_exit_code(SRGDIFF_ERR_CONFIG), 1);
  EXPECT_EQ(srgdiff_exit_code(SRGDIFF_ERR_IO), 2);
  EXPECT_EQ(srgdiff_exit_code(SRGDIFF_ERR_NUMERICAL), 2);
  EXPECT_EQ(srgdiff_stage_count(), 6u);
  EXPECT_STREQ(srgdiff_stage_name(0), "synth");
  EXPECT_EQ(srgdiff_stage_name(6), nullptr);
}

// --------------------------------------------------------------------- CLI

TEST(Cli, UnknownSubcommandExitsOne) {
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli(""), 1);
}

TEST(Cli, ConfigErrorsExitOne) {
  const fs::path dir = scratch("cli_cfg");
  std::ofstream(dir / "bad.ini") << "[sr]\nscale = 5\n";
  EXPECT_EQ(run_cli("synth -c " + (dir / "bad.ini").string()), 1);
  EXPECT_EQ(run_cli("synth -c " + (dir / "absent.ini").string()), 1);
}

TEST(Cli, EvalWithoutSuperresExitsOne) {
  const fs::path dir = scratch("cli_eval");
  std::ofstream(dir / "run.ini") << kTinyConfig << "[output]\ndir = out\n";
  const std::string cfg = (dir / "run.ini").string();
  ASSERT_EQ(run_cli("synth -c " + cfg), 0);
  const std::string cmd = std::string(SRGDIFF_CLI_PATH) + " eval -c " + cfg + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  std::string output;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) output += buf;
  const int status = pclose(pipe);
  EXPECT_EQ(WEXITSTATUS(status), 1);
  EXPECT_NE(output.find("missing reconstructions"), std::string::npos) << output;
}

TEST(Cli, CorruptArtifactExitsTwo) {
  const fs::path dir = scratch("cli_corrupt");
  std::ofstream(dir / "run.ini") << kTinyConfig << "[output]\ndir = out\n";
  const std::string cfg = (dir / "run.ini").string();
  ASSERT_EQ(run_cli("synth -c " + cfg), 0);
  std::ofstream(dir / "out" / "corpus" / "hd.tensor", std::ios::trunc) << "garbage";
  EXPECT_EQ(run_cli("train-vae -c " + cfg), 2);
}

TEST(Cli, SynthTwiceGivesIdenticalCorpus) {
  const fs::path dir = scratch("cli_synth");
  std::ofstream(dir / "a.ini") << kTinyConfig << "[output]\ndir = a\n";
  std::ofstream(dir / "b.ini") << kTinyConfig << "[output]\ndir = b\n";
  ASSERT_EQ(run_cli("synth -c " + (dir / "a.ini").string()), 0);
  ASSERT_EQ(run_cli("synth -c " + (dir / "b.ini").string()), 0);
  for (const char* f : {"hd.tensor", "labels.tensor", "layout.txt", "manifest.txt", "meta.txt"})
    EXPECT_EQ(slurp(dir / "a" / "corpus" / f), slurp(dir / "b" / "corpus" / f)) << f;
}

TEST(Cli, SmokePipelineWritesAllArtifacts) {
  const fs::path dir = scratch("cli_smoke");
  std::ofstream(dir / "run.ini") << kTinyConfig << "[output]\ndir = out\n";
  const std::string cfg = (dir / "run.ini").string();
  for (const char* stage : {"synth", "train-vae", "train-sr", "superres", "eval", "topomap"}) {
    const std::string cmd = std::string(SRGDIFF_CLI_PATH) + " " + stage + " -c " + cfg;
    FILE* pipe = popen(cmd.c_str(), "r");
    ASSERT_NE(pipe, nullptr);
    std::vector<std::string> paths;
    char buf[1024];
    while (fgets(buf, sizeof buf, pipe)) {
      std::string line(buf);
      if (!line.empty() && line.back() == '\n') line.pop_back();
      paths.push_back(line);
    }
    ASSERT_EQ(WEXITSTATUS(pclose(pipe)), 0) << stage;
    ASSERT_FALSE(paths.empty()) << stage;
    for (const auto& p : paths) {
      ASSERT_TRUE(fs::exists(p)) << p;
      EXPECT_GT(fs::file_size(p), 0u) << p;
    }
  }
  const auto lines = read_lines(dir / "out" / "eval" / "metrics.csv");
  EXPECT_EQ(lines.at(0), kMetricsHeader);
  // Four methods, each with 4 test rows plus MEAN and STD.
  EXPECT_EQ(lines.size(), 1u + 4u * 6u);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv(lines[i]);
    ASSERT_EQ(f.size(), 8u);
    if (f[0] == "STD") continue;
    EXPECT_TRUE(std::isfinite(std::stod(f[3])));
  }
  const auto summary = read_summary(dir / "out" / "eval" / "summary.txt");
  EXPECT_TRUE(summary.count("fid_real_halves"));
  EXPECT_TRUE(summary.count("downstream_acc.ground_truth"));
  EXPECT_TRUE(summary.count("nmse.srgdiff.mean"));
}
