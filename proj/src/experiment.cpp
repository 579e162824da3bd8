// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "srgdiff/conditioning.hpp"
#include "srgdiff/error.hpp"
#include "srgdiff/eval/embedder.hpp"
#include "srgdiff/eval/forest.hpp"
#include "srgdiff/eval/frechet.hpp"
#include "srgdiff/eval/topomap.hpp"
#include "srgdiff/nn/checkpoint.hpp"
#include "srgdiff/spectral.hpp"
#include "srgdiff/tensor_io.hpp"

namespace srgdiff::experiment {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nn::Tensor;

namespace {

// Seed streams derived from the global seed.
enum SeedTag : std::uint64_t {
  kSeedCorpus = 1,
  kSeedSplit,
  kSeedVae,
  kSeedVaeTrain,
  kSeedSr,
  kSeedSrTrain,
  kSeedSample,
  kSeedEmbedder,
  kSeedForest,
  kSeedVisible,
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw IntegrityError("malformed " + what + ": '" + text + "'");
  }
}

// --------------------------------------------------------------- config io

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"", {"seed"}},
      {"data",
       {"channels", "fs", "window_seconds", "train", "val", "test", "amplitude_jitter", "noise_amplitude",
        "class_contrast", "mixing_seed"}},
      {"vae",
       {"latent_channels", "width", "stages", "groups", "attention", "epochs", "batch_size", "lr", "lambda_spec",
        "lambda_kl", "patience"}},
      {"diffusion", {"schedule", "steps", "offset", "beta_start", "beta_end", "sample_steps", "eta", "clip"}},
      {"sr",
       {"scale", "width", "emb_dim", "ablation", "residual_steering", "epochs", "batch_size", "lr", "lambda_res",
        "lambda_smm", "patience"}},
      {"eval", {"embed_dim", "embed_epochs", "forest_trees", "masked_only", "snr_pooling", "topomap_band", "topomap_samples"}},
      {"output", {"dir"}},
  };
  return keys;
}

void check_keys(const pt::ptree& tree) {
  const auto& keys = known_keys();
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (!keys.at("").count(name)) throw ConfigError("unknown top-level key '" + name + "'");
      continue;
    }
    auto section = keys.find(name);
    if (section == keys.end() || name.empty()) throw ConfigError("unknown config section [" + name + "]");
    for (const auto& [key, child] : node)
      if (!section->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
  }
}

template <typename T>
T get_or(const pt::ptree& tree, const std::string& path, T fallback) {
  auto node = tree.get_optional<std::string>(path);
  if (!node) return fallback;
  auto value = tree.get_optional<T>(path);
  if (!value) throw ConfigError("invalid value '" + *node + "' for " + path);
  return *value;
}

std::size_t get_count(const pt::ptree& tree, const std::string& path, std::size_t fallback) {
  const long long v = get_or<long long>(tree, path, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError(path + " must be non-negative");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> parse_index_list(const std::string& text, const std::string& path) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    if (item.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("invalid index '" + item + "' in " + path);
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return out;
}

void read_train(const pt::ptree& tree, const std::string& section, training::TrainConfig& t) {
  t.epochs = get_or<int>(tree, section + ".epochs", t.epochs);
  t.batch_size = get_count(tree, section + ".batch_size", t.batch_size);
  t.lr = get_or<double>(tree, section + ".lr", t.lr);
  t.patience = get_or<int>(tree, section + ".patience", t.patience);
}

// ------------------------------------------------------------------ helpers

Tensor normalized(const Tensor& x, double data_scale) { return x * (1.0 / data_scale); }

double rms(const Tensor& x) {
  double sq = 0.0;
  for (double v : x.values()) sq += v * v;
  const double r = std::sqrt(sq / static_cast<double>(x.size()));
  if (!(r > 0)) throw NumericalError("training windows have zero energy");
  return r;
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw ConfigError("missing " + what + " (" + path.string() + ")");
}

vae::Vae load_vae(const ExperimentConfig& cfg, double& data_scale) {
  const Layout out{cfg.output_dir};
  require_file(out.vae() / "manifest.txt", "Stage-1 checkpoint; run train-vae first");
  vae::VaeConfig vc = cfg.vae;
  vc.seed = derive_seed(cfg.seed, {kSeedVae});
  vae::Vae model(vc);
  auto meta = nn::load_checkpoint(out.vae(), model.params());
  if (!meta.count("data_scale")) throw IntegrityError("Stage-1 checkpoint lacks data_scale");
  data_scale = parse_double(meta.at("data_scale"), "data_scale");
  return model;
}

training::SrModelConfig sr_model_config(const ExperimentConfig& cfg, bool guided) {
  auto c = training::make_sr_config(cfg.vae, guided, cfg.diffusion.steps, cfg.sr.width, cfg.sr.emb_dim,
                                    derive_seed(cfg.seed, {kSeedSr, guided ? 1u : 0u}));
  c.residual_steering = cfg.sr.residual_steering;
  return c;
}

training::TrainConfig sr_train_config(const ExperimentConfig& cfg, bool guided) {
  training::TrainConfig t = cfg.sr.train;
  t.seed = derive_seed(cfg.seed, {kSeedSrTrain, guided ? 1u : 0u});
  if (!guided) t.lambda_res = t.lambda_smm = 0.0;
  return t;
}

struct PreparedSplit {
  Tensor hd;       // normalized HD
  Tensor ld;       // normalized LD rows
  std::vector<int> labels;
  std::vector<std::size_t> ids;
};

PreparedSplit prepare(const Corpus& corpus, Split split, const std::vector<std::size_t>& visible, double data_scale) {
  PreparedSplit p;
  p.hd = normalized(split_rows(corpus, split), data_scale);
  p.ld = gather_channels(p.hd, visible);
  p.labels = split_labels(corpus, split);
  p.ids = corpus.manifest.ids(split);
  return p;
}

Corpus require_corpus(const ExperimentConfig& cfg) {
  const Layout out{cfg.output_dir};
  require_file(out.corpus() / "hd.tensor", "corpus; run synth first");
  Corpus c = load_corpus(out.corpus());
  if (c.layout.size() != cfg.data.channels || c.hd.dim(2) != cfg.data.window_length())
    throw ConfigError("corpus in " + out.corpus().string() + " does not match the [data] profile");
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Flattened channels x bands DE features of every window.
Eigen::MatrixXd de_features(const Tensor& x, double fs, const ChannelLayout& layout) {
  const std::size_t n = x.dim(0), c = x.dim(1), l = x.dim(2);
  const std::size_t bands = spectral::canonical_bands().size();
  Eigen::MatrixXd out(n, c * bands);
  for (std::size_t i = 0; i < n; ++i) {
    Signal s(c, l);
    std::copy_n(x.data() + i * c * l, c * l, s.data());
    Eigen::MatrixXd f = spectral::de_feature(EegWindow(s, fs, layout));
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t b = 0; b < bands; ++b) out(i, ch * bands + b) = f(ch, b);
  }
  return out;
}

Signal window_signal(const Tensor& x, std::size_t i) {
  const std::size_t c = x.dim(1), l = x.dim(2);
  Signal s(c, l);
  std::copy_n(x.data() + i * c * l, c * l, s.data());
  return s;
}

}  // namespace

// ------------------------------------------------------------------- config

std::size_t DataConfig::window_length() const {
  return static_cast<std::size_t>(std::llround(fs * window_seconds));
}

diffusion::NoiseSchedule DiffusionConfig::build() const {
  return schedule == diffusion::ScheduleKind::kCosine ? diffusion::cosine_schedule(steps, offset)
                                                      : diffusion::linear_schedule(steps, beta_start, beta_end);
}

ExperimentConfig ExperimentConfig::parse(const std::string& text, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  check_keys(tree);

  ExperimentConfig c;
  c.seed = get_or<std::uint64_t>(tree, "seed", c.seed);

  auto& d = c.data;
  d.channels = get_count(tree, "data.channels", d.channels);
  d.fs = get_or<double>(tree, "data.fs", d.fs);
  d.window_seconds = get_or<double>(tree, "data.window_seconds", d.window_seconds);
  d.n_train = get_count(tree, "data.train", d.n_train);
  d.n_val = get_count(tree, "data.val", d.n_val);
  d.n_test = get_count(tree, "data.test", d.n_test);
  d.amplitude_jitter = get_or<double>(tree, "data.amplitude_jitter", d.amplitude_jitter);
  d.noise_amplitude = get_or<double>(tree, "data.noise_amplitude", d.noise_amplitude);
  d.class_contrast = get_or<double>(tree, "data.class_contrast", d.class_contrast);
  d.mixing_seed = get_or<std::uint64_t>(tree, "data.mixing_seed", d.mixing_seed);

  auto& v = c.vae;
  v.channels = d.channels;
  v.length = d.window_length();
  v.latent_channels = get_count(tree, "vae.latent_channels", v.latent_channels);
  v.width = get_count(tree, "vae.width", v.width);
  v.stages = get_count(tree, "vae.stages", v.stages);
  v.groups = get_count(tree, "vae.groups", v.groups);
  v.attention = get_or<bool>(tree, "vae.attention", v.attention);
  c.vae_train.epochs = 10;
  read_train(tree, "vae", c.vae_train);
  c.vae_train.lambda_spec = get_or<double>(tree, "vae.lambda_spec", c.vae_train.lambda_spec);
  c.vae_train.lambda_kl = get_or<double>(tree, "vae.lambda_kl", c.vae_train.lambda_kl);

  auto& df = c.diffusion;
  df.schedule = diffusion::parse_schedule_kind(get_or<std::string>(tree, "diffusion.schedule", "cosine"));
  df.steps = get_or<int>(tree, "diffusion.steps", df.steps);
  df.offset = get_or<double>(tree, "diffusion.offset", df.offset);
  df.beta_start = get_or<double>(tree, "diffusion.beta_start", df.beta_start);
  df.beta_end = get_or<double>(tree, "diffusion.beta_end", df.beta_end);
  df.sample_steps = get_or<int>(tree, "diffusion.sample_steps", df.sample_steps);
  df.eta = get_or<double>(tree, "diffusion.eta", df.eta);
  df.clip = get_or<double>(tree, "diffusion.clip", df.clip);

  auto& s = c.sr;
  s.scale = get_or<double>(tree, "sr.scale", s.scale);
  s.width = get_count(tree, "sr.width", s.width);
  s.emb_dim = get_count(tree, "sr.emb_dim", s.emb_dim);
  s.ablation = get_or<bool>(tree, "sr.ablation", s.ablation);
  s.residual_steering = get_or<bool>(tree, "sr.residual_steering", s.residual_steering);
  s.train.epochs = 20;
  read_train(tree, "sr", s.train);
  s.train.lambda_res = get_or<double>(tree, "sr.lambda_res", s.train.lambda_res);
  s.train.lambda_smm = get_or<double>(tree, "sr.lambda_smm", s.train.lambda_smm);

  auto& e = c.eval;
  e.embed_dim = get_count(tree, "eval.embed_dim", e.embed_dim);
  e.embed_epochs = get_or<int>(tree, "eval.embed_epochs", e.embed_epochs);
  e.forest_trees = get_or<int>(tree, "eval.forest_trees", e.forest_trees);
  e.masked_only = get_or<bool>(tree, "eval.masked_only", e.masked_only);
  const auto pooling = get_or<std::string>(tree, "eval.snr_pooling", "window");
  if (pooling == "window")
    e.snr_pooling = eval::SnrPooling::Window;
  else if (pooling == "channel")
    e.snr_pooling = eval::SnrPooling::Channel;
  else
    throw ConfigError("eval.snr_pooling must be 'window' or 'channel', got '" + pooling + "'");
  e.topomap_band = get_or<std::string>(tree, "eval.topomap_band", e.topomap_band);
  if (auto list = tree.get_optional<std::string>("eval.topomap_samples"))
    e.topomap_samples = parse_index_list(*list, "eval.topomap_samples");

  fs::path dir = get_or<std::string>(tree, "output.dir", c.output_dir.string());
  c.output_dir = ((dir.is_relative() && !base_dir.empty()) ? base_dir / dir : dir).lexically_normal();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse(text, fs::absolute(path).parent_path());
}

void ExperimentConfig::validate() const {
  const auto& d = data;
  if (d.channels < 3) throw ConfigError("data.channels must be at least 3");
  if (!(d.fs > 0) || !(d.window_seconds > 0)) throw ConfigError("data.fs and data.window_seconds must be positive");
  if (d.fs * d.window_seconds < d.fs) throw ConfigError("windows must span at least one second");
  if (d.n_train < 2 || d.n_val < 1 || d.n_test < 4) throw ConfigError("need >= 2 train, >= 1 val and >= 4 test windows");
  if (!(d.class_contrast >= 0 && d.class_contrast < 1)) throw ConfigError("data.class_contrast must lie in [0, 1)");
  if (!(d.amplitude_jitter >= 0) || !(d.noise_amplitude >= 0)) throw ConfigError("data noise levels must be >= 0");
  const double sc = sr.scale;
  if (sc != 2 && sc != 4 && sc != 8 && sc != 16) throw ConfigError("sr.scale must be one of 2, 4, 8, 16");
  if (std::llround(static_cast<double>(d.channels) / sc) >= static_cast<long long>(d.channels))
    throw ConfigError("sr.scale leaves no channel to reconstruct");
  if (vae.stages < 1) throw ConfigError("vae.stages must be >= 1");
  if (d.window_length() % (std::size_t{1} << vae.stages) != 0)
    throw ConfigError("window length " + std::to_string(d.window_length()) + " not divisible by 2^vae.stages");
  vae.validate();
  vae_train.validate();
  sr.train.validate();
  if (sr.width == 0 || sr.emb_dim == 0 || sr.emb_dim % 2 != 0)
    throw ConfigError("sr.width must be positive and sr.emb_dim positive and even");
  diffusion.build();
  if (diffusion.sample_steps < 1 || diffusion.sample_steps > diffusion.steps)
    throw ConfigError("diffusion.sample_steps must lie in [1, diffusion.steps]");
  if (!(diffusion.eta >= 0 && diffusion.eta <= 1)) throw ConfigError("diffusion.eta must lie in [0, 1]");
  if (!(diffusion.clip >= 0)) throw ConfigError("diffusion.clip must be >= 0");
  if (eval.embed_dim == 0 || eval.embed_epochs < 1 || eval.forest_trees < 1)
    throw ConfigError("eval.embed_dim, eval.embed_epochs and eval.forest_trees must be positive");
  const auto& bands = spectral::canonical_bands();
  if (std::none_of(bands.begin(), bands.end(), [&](const auto& b) { return b.name == eval.topomap_band; }))
    throw ConfigError("unknown eval.topomap_band '" + eval.topomap_band + "'");
  for (std::size_t i : eval.topomap_samples)
    if (i >= d.n_test) throw ConfigError("eval.topomap_samples index " + std::to_string(i) + " beyond test split");
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

// ------------------------------------------------------------------- corpus

Corpus make_corpus(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  Corpus corpus;
  corpus.layout = ChannelLayout::spiral(d.channels);
  corpus.fs = d.fs;
  const std::size_t n = d.total(), c = d.channels, l = d.window_length();
  corpus.hd = Tensor({n, c, l});
  corpus.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    SynthConfig sc;
    sc.n_channels = c;
    sc.fs = d.fs;
    sc.duration = d.window_seconds;
    sc.seed = derive_seed(cfg.seed, {kSeedCorpus, i});
    sc.amplitude_jitter = d.amplitude_jitter;
    sc.noise_amplitude = d.noise_amplitude;
    sc.mixing_seed = d.mixing_seed;
    sc.layout = corpus.layout;
    // Class 0 is alpha-dominant, class 1 beta-dominant.
    const double up = 1.0 + d.class_contrast, down = 1.0 - d.class_contrast;
    sc.sources[2].amplitude *= label == 0 ? up : down;
    sc.sources[3].amplitude *= label == 0 ? down : up;
    Signal s = synth_eeg(sc);
    if (static_cast<std::size_t>(s.cols()) < l) throw ConfigError("synthesized window shorter than the profile");
    for (std::size_t ch = 0; ch < c; ++ch) std::copy_n(s.row(ch).data(), l, corpus.hd.data() + (i * c + ch) * l);
    corpus.labels[i] = label;
  }
  const double total = static_cast<double>(n);
  SplitRatios ratios{static_cast<double>(d.n_train) / total, static_cast<double>(d.n_val) / total, 0.0};
  ratios.test = 1.0 - ratios.train - ratios.val;
  corpus.manifest = split_dataset(n, ratios, derive_seed(cfg.seed, {kSeedSplit}),
                                  visible_channels(cfg, corpus.layout));
  // The stored tensor is f32; round now so in-memory and on-disk corpora agree.
  for (double& v : corpus.hd.storage()) v = static_cast<double>(static_cast<float>(v));
  return corpus;
}

void save_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_tensor(dir / "hd.tensor", corpus.hd);
  Tensor labels({corpus.labels.size()});
  for (std::size_t i = 0; i < corpus.labels.size(); ++i) labels[i] = corpus.labels[i];
  io::write_tensor(dir / "labels.tensor", labels);
  write_text(dir / "layout.txt", corpus.layout.serialize());
  write_text(dir / "manifest.txt", corpus.manifest.serialize());
  write_text(dir / "meta.txt", "fs\t" + format_double(corpus.fs) + "\n");
}

Corpus load_corpus(const fs::path& dir) {
  Corpus c;
  c.hd = io::read_tensor(dir / "hd.tensor");
  Tensor labels = io::read_tensor(dir / "labels.tensor");
  for (double v : labels.values()) c.labels.push_back(static_cast<int>(v));
  c.layout = ChannelLayout::parse(read_text(dir / "layout.txt"));
  c.manifest = DatasetManifest::parse(read_text(dir / "manifest.txt"));
  std::istringstream meta(read_text(dir / "meta.txt"));
  std::string key, value;
  while (meta >> key >> value)
    if (key == "fs") c.fs = parse_double(value, "corpus fs");
  if (c.hd.rank() != 3 || c.hd.dim(0) != c.labels.size() || c.hd.dim(0) != c.manifest.records.size() ||
      c.hd.dim(1) != c.layout.size() || !(c.fs > 0))
    throw IntegrityError("inconsistent corpus in " + dir.string());
  return c;
}

Tensor split_rows(const Corpus& corpus, Split split) { return nn::take_rows(corpus.hd, corpus.manifest.ids(split)); }

std::vector<int> split_labels(const Corpus& corpus, Split split) {
  std::vector<int> out;
  for (std::size_t id : corpus.manifest.ids(split)) out.push_back(corpus.labels.at(id));
  return out;
}

std::vector<std::size_t> visible_channels(const ExperimentConfig& cfg, const ChannelLayout& layout) {
  return select_visible(layout, cfg.sr.scale, derive_seed(cfg.seed, {kSeedVisible}));
}

std::vector<std::size_t> masked_channels(std::size_t channels, const std::vector<std::size_t>& visible) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < channels; ++c)
    if (std::find(visible.begin(), visible.end(), c) == visible.end()) out.push_back(c);
  return out;
}

Tensor gather_channels(const Tensor& x, const std::vector<std::size_t>& rows) {
  const std::size_t n = x.dim(0), c = x.dim(1), l = x.dim(2);
  Tensor out({n, rows.size(), l});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k] >= c) throw ShapeError("channel index " + std::to_string(rows[k]) + " out of range");
      std::copy_n(x.data() + (i * c + rows[k]) * l, l, out.data() + (i * rows.size() + k) * l);
    }
  return out;
}

const std::vector<std::string>& method_names(const ExperimentConfig& cfg) {
  static const std::vector<std::string> with{"srgdiff", "ablation", "idw", "nearest"};
  static const std::vector<std::string> without{"srgdiff", "idw", "nearest"};
  return cfg.sr.ablation ? with : without;
}

// ------------------------------------------------------------------- stages

std::vector<fs::path> run_synth(const ExperimentConfig& cfg) {
  const Layout out{cfg.output_dir};
  save_corpus(make_corpus(cfg), out.corpus());
  return {out.corpus() / "hd.tensor", out.corpus() / "labels.tensor", out.corpus() / "layout.txt",
          out.corpus() / "manifest.txt", out.corpus() / "meta.txt"};
}

std::vector<fs::path> run_train_vae(const ExperimentConfig& cfg) {
  const Layout out{cfg.output_dir};
  Corpus corpus = require_corpus(cfg);
  Tensor train = split_rows(corpus, Split::kTrain);
  const double data_scale = rms(train);
  train = normalized(train, data_scale);
  Tensor val = normalized(split_rows(corpus, Split::kVal), data_scale);

  vae::VaeConfig vc = cfg.vae;
  vc.seed = derive_seed(cfg.seed, {kSeedVae});
  vae::Vae model(vc);
  training::TrainConfig tc = cfg.vae_train;
  tc.seed = derive_seed(cfg.seed, {kSeedVaeTrain});
  auto report = training::stage1_train(model, train, val, tc);
  nn::save_checkpoint(out.vae(), model.params(), {{"data_scale", format_double(data_scale)}, {"stage", "1"}});
  report.write_csv(out.vae() / "report.csv");
  return {out.vae() / "manifest.txt", out.vae() / "report.csv"};
}

std::vector<fs::path> run_train_sr(const ExperimentConfig& cfg) {
  const Layout out{cfg.output_dir};
  Corpus corpus = require_corpus(cfg);
  double data_scale = 0.0;
  vae::Vae model = load_vae(cfg, data_scale);
  training::require_frozen(model);
  const auto visible = visible_channels(cfg, corpus.layout);
  const Eigen::MatrixXd map = idw_upsampler(corpus.layout, visible);
  auto train = prepare(corpus, Split::kTrain, visible, data_scale);
  auto val = prepare(corpus, Split::kVal, visible, data_scale);
  const double latent_scale = training::latent_scale_for(model, train.hd);
  auto dtrain = training::encode_pairs(model, map, train.hd, train.ld, latent_scale);
  auto dval = training::encode_pairs(model, map, val.hd, val.ld, latent_scale);
  const auto schedule = cfg.diffusion.build();

  std::vector<fs::path> written;
  for (bool guided : {true, false}) {
    if (!guided && !cfg.sr.ablation) continue;
    training::SrModel sr(sr_model_config(cfg, guided));
    auto report = training::stage2_train(model, sr, dtrain, dval, schedule, sr_train_config(cfg, guided));
    const fs::path dir = out.model(guided);
    nn::save_checkpoint(dir, sr.params(),
                        {{"latent_scale", format_double(latent_scale)},
                         {"data_scale", format_double(data_scale)},
                         {"residual_guidance", guided ? "1" : "0"},
                         {"stage", "2"}});
    report.write_csv(dir / "report.csv");
    written.push_back(dir / "manifest.txt");
    written.push_back(dir / "report.csv");
  }
  return written;
}

std::vector<fs::path> run_superres(const ExperimentConfig& cfg) {
  const Layout out{cfg.output_dir};
  Corpus corpus = require_corpus(cfg);
  double data_scale = 0.0;
  vae::Vae model = load_vae(cfg, data_scale);
  const auto visible = visible_channels(cfg, corpus.layout);
  const Eigen::MatrixXd map = idw_upsampler(corpus.layout, visible);
  auto test = prepare(corpus, Split::kTest, visible, data_scale);
  const auto schedule = cfg.diffusion.build();
  fs::create_directories(out.recon());

  std::vector<fs::path> written;
  auto save = [&](const std::string& method, const Tensor& normalized_recon) {
    io::write_tensor(out.recon_file(method), normalized_recon * data_scale);
    written.push_back(out.recon_file(method));
  };

  for (bool guided : {true, false}) {
    if (!guided && !cfg.sr.ablation) continue;
    const fs::path dir = out.model(guided);
    require_file(dir / "manifest.txt", "Stage-2 checkpoint; run train-sr first");
    training::SrModel sr(sr_model_config(cfg, guided));
    auto meta = nn::load_checkpoint(dir, sr.params());
    const double latent_scale = parse_double(meta.at("latent_scale"), "latent_scale");
    auto cond = training::encode_condition(model, map, test.ld, latent_scale);
    diffusion::SampleOptions opt;
    opt.steps = cfg.diffusion.sample_steps;
    opt.ddim.eta = cfg.diffusion.eta;
    opt.ddim.clip = cfg.diffusion.clip;
    opt.seed = derive_seed(cfg.seed, {kSeedSample, guided ? 1u : 0u});
    Tensor z = training::sample_latents(sr, cond, schedule, opt) * (1.0 / latent_scale);
    nn::Tape tape;
    save(guided ? "srgdiff" : "ablation", model.decode(tape, tape.constant(z)).value());
  }
  save("idw", conditioning::apply_channel_map(map, test.ld));
  save("nearest", conditioning::apply_channel_map(nearest_upsampler(corpus.layout, visible), test.ld));
  return written;
}

std::vector<fs::path> run_eval(const ExperimentConfig& cfg) {
  const Layout out{cfg.output_dir};
  for (const auto& m : method_names(cfg))
    if (!fs::exists(out.recon_file(m)))
      throw ConfigError("missing reconstructions for '" + m + "'; run superres first");
  Corpus corpus = require_corpus(cfg);
  const auto visible = visible_channels(cfg, corpus.layout);
  const auto masked = masked_channels(corpus.layout.size(), visible);
  const std::vector<std::size_t> rows = cfg.eval.masked_only ? masked : std::vector<std::size_t>{};

  Tensor train_hd = split_rows(corpus, Split::kTrain);
  const double data_scale = rms(train_hd);
  Tensor test_hd = split_rows(corpus, Split::kTest);
  const auto test_ids = corpus.manifest.ids(Split::kTest);
  const auto train_labels = split_labels(corpus, Split::kTrain);
  const auto test_labels = split_labels(corpus, Split::kTest);

  // Feature level: frozen embedder trained on the HD training split.
  eval::EmbedderConfig ec;
  ec.channels = corpus.layout.size();
  ec.length = train_hd.dim(2);
  ec.classes = 2;
  ec.embed_dim = cfg.eval.embed_dim;
  ec.epochs = cfg.eval.embed_epochs;
  ec.seed = derive_seed(cfg.seed, {kSeedEmbedder});
  eval::Embedder embedder(ec);
  eval::train_embedder(embedder, normalized(train_hd, data_scale), train_labels);
  const Eigen::MatrixXd real_emb = embedder.embeddings(normalized(test_hd, data_scale));
  const Eigen::Index half = real_emb.rows() / 2;
  const double fid_halves =
      eval::frechet_distance(Eigen::MatrixXd(real_emb.topRows(half)), Eigen::MatrixXd(real_emb.bottomRows(half)));

  // Downstream level: forest on DE features of the HD training split.
  eval::ForestConfig fc;
  fc.n_trees = cfg.eval.forest_trees;
  fc.seed = derive_seed(cfg.seed, {kSeedForest});
  const auto forest = eval::forest_train(de_features(train_hd, corpus.fs, corpus.layout), train_labels, fc);
  const double acc_truth =
      eval::accuracy(eval::forest_predict(forest, de_features(test_hd, corpus.fs, corpus.layout)), test_labels);

  std::vector<MethodResult> results;
  for (const auto& method : method_names(cfg)) {
    Tensor recon = io::read_tensor(out.recon_file(method));
    if (recon.shape() != test_hd.shape())
      throw IntegrityError("reconstructions for '" + method + "' have shape " + nn::to_string(recon.shape()) +
                           ", expected " + nn::to_string(test_hd.shape()));
    MethodResult r;
    r.method = method;
    r.scale = cfg.sr.scale;
    r.samples.resize(test_ids.size());
    for (std::size_t i = 0; i < test_ids.size(); ++i)
      r.samples[i] = {test_ids[i], eval::window_metrics(window_signal(recon, i), window_signal(test_hd, i), rows, cfg.eval.snr_pooling)};
    r.eeg_fid = eval::frechet_distance(embedder.embeddings(normalized(recon, data_scale)), real_emb);
    r.downstream_acc =
        eval::accuracy(eval::forest_predict(forest, de_features(recon, corpus.fs, corpus.layout)), test_labels);
    results.push_back(std::move(r));
  }
  fs::create_directories(out.eval());
  write_metrics_csv(out.metrics_csv(), results);

  std::ostringstream summary;
  summary << "fid_real_halves = " << format_double(fid_halves) << '\n';
  summary << "downstream_acc.ground_truth = " << format_double(acc_truth) << '\n';
  for (const auto& r : results) {
    std::vector<double> nmse, pcc, snr;
    for (const auto& s : r.samples) {
      nmse.push_back(s.metrics.nmse);
      pcc.push_back(s.metrics.pcc);
      snr.push_back(s.metrics.snr_db);
    }
    for (const auto& [name, values] : {std::pair{"nmse", &nmse}, std::pair{"pcc", &pcc}, std::pair{"snr_db", &snr}}) {
      const auto ms = eval::mean_std(*values);
      summary << name << '.' << r.method << ".mean = " << format_double(ms.mean) << '\n';
      summary << name << '.' << r.method << ".std = " << format_double(ms.std) << '\n';
    }
    summary << "eeg_fid." << r.method << " = " << format_double(r.eeg_fid) << '\n';
    summary << "downstream_acc." << r.method << " = " << format_double(r.downstream_acc) << '\n';
  }
  write_text(out.summary(), summary.str());
  return {out.metrics_csv(), out.summary()};
}

std::vector<fs::path> run_topomap(const ExperimentConfig& cfg) {
  const Layout out{cfg.output_dir};
  for (const char* m : {"srgdiff", "idw"})
    if (!fs::exists(out.recon_file(m)))
      throw ConfigError(std::string("missing reconstructions for '") + m + "'; run superres first");
  Corpus corpus = require_corpus(cfg);
  const auto visible = visible_channels(cfg, corpus.layout);
  const ChannelLayout ld_layout = corpus.layout.subset(visible);
  Tensor test_hd = split_rows(corpus, Split::kTest);
  Tensor srgdiff = io::read_tensor(out.recon_file("srgdiff"));
  Tensor idw = io::read_tensor(out.recon_file("idw"));
  const auto test_ids = corpus.manifest.ids(Split::kTest);
  const auto& bands = spectral::canonical_bands();
  const auto band = *std::find_if(bands.begin(), bands.end(), [&](const auto& b) { return b.name == cfg.eval.topomap_band; });

  auto band_values = [&](const Signal& s, const ChannelLayout& layout) {
    Eigen::MatrixXd psd = spectral::psd_feature(EegWindow(s, corpus.fs, layout), {band});
    return std::vector<double>(psd.data(), psd.data() + psd.rows());
  };

  fs::create_directories(out.topomap());
  std::vector<fs::path> written;
  for (std::size_t k : cfg.eval.topomap_samples) {
    if (k >= test_hd.dim(0)) throw ConfigError("topomap sample " + std::to_string(k) + " beyond test split");
    const Signal gt = window_signal(test_hd, k);
    std::vector<eval::TopomapPanel> panels{
        {"LD input", ld_layout, band_values(gather_rows(gt, visible), ld_layout)},
        {"IDW", corpus.layout, band_values(window_signal(idw, k), corpus.layout)},
        {"SRGDiff", corpus.layout, band_values(window_signal(srgdiff, k), corpus.layout)},
        {"Ground truth", corpus.layout, band_values(gt, corpus.layout)},
    };
    const std::string caption = band.name + " band power, test sample " + std::to_string(test_ids[k]) + ", " +
                                format_double(cfg.sr.scale) + "x";
    const fs::path path = out.topomap() / ("topomap_" + std::to_string(test_ids[k]) + ".svg");
    write_text(path, eval::render_topomap_svg(panels, caption));
    written.push_back(path);
  }
  return written;
}

// ------------------------------------------------------------------ outputs

void write_metrics_csv(const fs::path& path, const std::vector<MethodResult>& results) {
  if (results.empty()) throw ConfigError("no metrics to write");
  std::ostringstream csv;
  csv << kMetricsHeader << '\n';
  auto num = [](double v) { return format_double(v); };
  for (const auto& r : results) {
    if (r.samples.empty()) throw ConfigError("method '" + r.method + "' has no samples");
    const std::string scale = num(r.scale);
    std::vector<double> nmse, pcc, snr;
    for (const auto& s : r.samples) {
      csv << s.sample_id << ',' << scale << ',' << r.method << ',' << num(s.metrics.nmse) << ','
          << num(s.metrics.pcc) << ',' << num(s.metrics.snr_db) << ",,\n";
      nmse.push_back(s.metrics.nmse);
      pcc.push_back(s.metrics.pcc);
      snr.push_back(s.metrics.snr_db);
    }
    const auto a = eval::mean_std(nmse), b = eval::mean_std(pcc), c = eval::mean_std(snr);
    csv << "MEAN," << scale << ',' << r.method << ',' << num(a.mean) << ',' << num(b.mean) << ',' << num(c.mean)
        << ',' << num(r.eeg_fid) << ',' << num(r.downstream_acc) << '\n';
    csv << "STD," << scale << ',' << r.method << ',' << num(a.std) << ',' << num(b.std) << ',' << num(c.std)
        << ",0,0\n";
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, csv.str());
}

std::vector<SummaryRow> read_metrics_summary(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw IntegrityError("metrics CSV header mismatch in " + path.string());
  std::vector<SummaryRow> out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw IntegrityError("metrics CSV row has " + std::to_string(f.size()) + " fields: " + line);
    if (f[0] != "MEAN" && f[0] != "STD") continue;
    SummaryRow r;
    r.sample_id = f[0];
    r.method = f[2];
    r.nmse = parse_double(f[3], "nmse");
    r.pcc = parse_double(f[4], "pcc");
    r.snr_db = parse_double(f[5], "snr_db");
    r.eeg_fid = parse_double(f[6], "eeg_fid");
    r.downstream_acc = parse_double(f[7], "downstream_acc");
    out.push_back(r);
  }
  return out;
}

std::map<std::string, double> read_summary(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::map<std::string, double> out;
  std::string key, eq, value;
  while (in >> key >> eq >> value) {
    if (eq != "=") throw IntegrityError("malformed summary line for " + key);
    out[key] = parse_double(value, key);
  }
  return out;
}

}  // namespace srgdiff::experiment
