// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/eeg_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "srgdiff/error.hpp"
#include "srgdiff/random.hpp"

namespace srgdiff {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Unit source amplitude in microvolts.
constexpr double kMicrovoltsPerUnit = 10.0;

bool is_integral(double v) { return std::abs(v - std::round(v)) < 1e-9; }

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// ---------------------------------------------------------------------------

ChannelLayout::ChannelLayout(std::vector<std::string> names, std::vector<Point2> positions)
    : names_(std::move(names)), positions_(std::move(positions)) {
  if (names_.size() != positions_.size())
    throw ConfigError("layout has " + std::to_string(names_.size()) + " names but " +
                      std::to_string(positions_.size()) + " positions");
  std::set<std::string> seen;
  for (const auto& n : names_)
    if (!seen.insert(n).second) throw ConfigError("duplicate channel name '" + n + "'");
  for (const auto& p : positions_)
    if (!(std::hypot(p.x, p.y) <= 1.0 + 1e-12))
      throw ConfigError("channel position outside the unit disc");
}

ChannelLayout ChannelLayout::spiral(std::size_t n) {
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<std::string> names;
  std::vector<Point2> pos;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = 0.9 * std::sqrt((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    const double th = golden * static_cast<double>(i);
    names.push_back((i + 1 < 10 ? "E0" : "E") + std::to_string(i + 1));
    pos.push_back({r * std::cos(th), r * std::sin(th)});
  }
  return ChannelLayout(std::move(names), std::move(pos));
}

ChannelLayout ChannelLayout::subset(const std::vector<std::size_t>& indices) const {
  std::vector<std::string> names;
  std::vector<Point2> pos;
  for (std::size_t i : indices) {
    names.push_back(names_.at(i));
    pos.push_back(positions_.at(i));
  }
  return ChannelLayout(std::move(names), std::move(pos));
}

std::string ChannelLayout::serialize() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < size(); ++i)
    os << names_[i] << '\t' << positions_[i].x << '\t' << positions_[i].y << '\n';
  return os.str();
}

ChannelLayout ChannelLayout::parse(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> names;
  std::vector<Point2> pos;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split_fields(line, '\t');
    if (f.size() != 3) throw ConfigError("malformed layout line: " + line);
    names.push_back(f[0]);
    pos.push_back({std::stod(f[1]), std::stod(f[2])});
  }
  return ChannelLayout(std::move(names), std::move(pos));
}

EegWindow::EegWindow(Signal data, double fs, ChannelLayout layout)
    : data_(std::move(data)), fs_(fs), layout_(std::move(layout)) {
  if (data_.cols() <= 0) throw ConfigError("EEG window must have at least one sample");
  if (static_cast<std::size_t>(data_.rows()) != layout_.size())
    throw ConfigError("window has " + std::to_string(data_.rows()) + " channels but layout has " +
                      std::to_string(layout_.size()));
  if (!(fs_ > 0.0)) throw ConfigError("sampling rate must be positive");
  if (!data_.allFinite()) throw NumericalError("EEG window contains non-finite samples");
}

// ---------------------------------------------------------------------------

std::vector<BandSource> SynthConfig::default_sources() {
  return {{1.0, 3.0, 1.0}, {4.0, 7.0, 0.8}, {8.0, 13.0, 1.0}, {14.0, 30.0, 0.6}, {31.0, 50.0, 0.3}};
}

Eigen::MatrixXd mixing_matrix(const ChannelLayout& layout, std::size_t n_sources,
                              std::uint64_t mixing_seed, double width) {
  Rng rng(derive_seed(mixing_seed, {0x6d6978}));
  const std::size_t c = layout.size();
  Eigen::MatrixXd a(c, n_sources);
  auto random_point = [&rng]() {
    const double r = 0.8 * std::sqrt(rng.uniform());
    const double th = kTwoPi * rng.uniform();
    return Point2{r * std::cos(th), r * std::sin(th)};
  };
  for (std::size_t k = 0; k < n_sources; ++k) {
    const Point2 pos = random_point();
    const Point2 neg = random_point();
    const double neg_weight = rng.uniform(0.4, 0.9);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double dp = distance(layout.position(ch), pos);
      const double dn = distance(layout.position(ch), neg);
      a(ch, k) = std::exp(-dp * dp / (2 * width * width)) -
                 neg_weight * std::exp(-dn * dn / (2 * width * width));
    }
    const double rms = std::sqrt(a.col(k).squaredNorm() / static_cast<double>(c));
    if (rms > 0) a.col(k) /= rms;
  }
  return a;
}

Signal synth_eeg(const SynthConfig& config) {
  if (config.n_channels < 2) throw ConfigError("synth_eeg needs at least 2 channels");
  if (!(config.fs > 0.0)) throw ConfigError("synth_eeg needs a positive sampling rate");
  if (!(config.duration > 0.0)) throw ConfigError("synth_eeg needs a positive duration");
  if (!is_integral(config.fs * config.duration))
    throw ConfigError("fs * duration must be an integral sample count");
  if (config.noise_amplitude < 0) throw ConfigError("noise amplitude must be nonnegative");
  for (const auto& s : config.sources)
    if (s.lo_hz < 0 || s.hi_hz < s.lo_hz || s.hi_hz > config.fs / 2)
      throw ConfigError("source band outside [0, fs/2]");

  const ChannelLayout layout =
      config.layout.size() ? config.layout : ChannelLayout::spiral(config.n_channels);
  if (layout.size() != config.n_channels)
    throw ConfigError("layout size does not match n_channels");

  const auto n = static_cast<std::size_t>(std::llround(config.fs * config.duration));
  const std::size_t c = config.n_channels;
  const std::size_t k = config.sources.size();

  Eigen::MatrixXd sources = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                  static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < k; ++s) {
    Rng rng(derive_seed(config.seed, {1, s}));
    const BandSource& src = config.sources[s];
    const std::size_t m = std::max<std::size_t>(config.components_per_source, 1);
    std::vector<double> freq(m), phase(m), amp(m);
    double power = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      freq[j] = rng.uniform(src.lo_hz, src.hi_hz);
      phase[j] = rng.uniform(0.0, kTwoPi);
      amp[j] = rng.uniform(0.5, 1.0);
      power += 0.5 * amp[j] * amp[j];
    }
    double gain = src.amplitude / std::sqrt(power);
    if (config.amplitude_jitter > 0) gain *= std::exp(config.amplitude_jitter * rng.normal());
    for (std::size_t t = 0; t < n; ++t) {
      const double time = static_cast<double>(t) / config.fs;
      double v = 0.0;
      for (std::size_t j = 0; j < m; ++j) v += amp[j] * std::sin(kTwoPi * freq[j] * time + phase[j]);
      sources(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = gain * v;
    }
  }

  const Eigen::MatrixXd mix = mixing_matrix(layout, k, config.mixing_seed, config.mixing_width);
  Signal out = mix * sources;

  if (config.noise_amplitude > 0) {
    // Sum of AR(1) processes with log-spaced corner frequencies approximates a
    // 1/f spectrum between 0.5 Hz and fs/4.
    constexpr std::size_t kPoles = 8;
    std::array<double, kPoles> rho{};
    for (std::size_t j = 0; j < kPoles; ++j) {
      const double f = 0.5 * std::pow(config.fs / 2.0, static_cast<double>(j) / (kPoles - 1));
      rho[j] = std::exp(-kTwoPi * f / config.fs);
    }
    const double scale = config.noise_amplitude / std::sqrt(static_cast<double>(kPoles));
    for (std::size_t ch = 0; ch < c; ++ch) {
      Rng rng(derive_seed(config.seed, {2, ch}));
      std::array<double, kPoles> state{};
      for (double& s : state) s = rng.normal();
      for (std::size_t t = 0; t < n; ++t) {
        double v = 0.0;
        for (std::size_t j = 0; j < kPoles; ++j) {
          state[j] = rho[j] * state[j] + std::sqrt(1.0 - rho[j] * rho[j]) * rng.normal();
          v += state[j];
        }
        out(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(t)) += scale * v;
      }
    }
  }
  out *= kMicrovoltsPerUnit;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<EegWindow> segment_windows(const Signal& signal, double fs,
                                       const ChannelLayout& layout, double window_seconds,
                                       double hop_seconds) {
  if (!(fs > 0)) throw ConfigError("sampling rate must be positive");
  if (!is_integral(window_seconds * fs) || window_seconds * fs < 1)
    throw ConfigError("window length must be a positive integral number of samples");
  if (!is_integral(hop_seconds * fs) || hop_seconds * fs < 1)
    throw ConfigError("hop must be a positive integral number of samples");
  const auto win = static_cast<Eigen::Index>(std::llround(window_seconds * fs));
  const auto hop = static_cast<Eigen::Index>(std::llround(hop_seconds * fs));
  std::vector<EegWindow> out;
  for (Eigen::Index start = 0; start + win <= signal.cols(); start += hop)
    out.emplace_back(Signal(signal.middleCols(start, win)), fs, layout);
  return out;
}

std::vector<std::size_t> select_visible(const ChannelLayout& layout, double scale,
                                        std::uint64_t seed) {
  if (!(scale >= 1.0)) throw ConfigError("super-resolution scale must be >= 1");
  const std::size_t c = layout.size();
  if (c == 0) throw ConfigError("empty layout");
  const std::size_t want =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(c) / scale)));

  std::vector<std::size_t> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 eng(derive_seed(seed, {0x766973}));
  std::shuffle(perm.begin(), perm.end(), eng);
  std::vector<std::size_t> rank(c);
  for (std::size_t i = 0; i < c; ++i) rank[perm[i]] = i;

  constexpr double kTie = 1e-12;
  auto better = [&](double score, std::size_t idx, double best, std::size_t best_idx) {
    if (score > best + kTie) return true;
    return std::abs(score - best) <= kTie && rank[idx] < rank[best_idx];
  };

  Point2 centroid;
  for (const auto& p : layout.positions()) {
    centroid.x += p.x / static_cast<double>(c);
    centroid.y += p.y / static_cast<double>(c);
  }
  std::vector<double> min_dist(c, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(c, 0);
  std::vector<std::size_t> out;

  std::size_t first = 0;
  for (std::size_t i = 1; i < c; ++i)
    if (better(distance(layout.position(i), centroid), i,
               distance(layout.position(first), centroid), first))
      first = i;
  auto take = [&](std::size_t idx) {
    chosen[idx] = 1;
    out.push_back(idx);
    for (std::size_t j = 0; j < c; ++j)
      min_dist[j] = std::min(min_dist[j], distance(layout.position(j), layout.position(idx)));
  };
  take(first);
  while (out.size() < want) {
    std::size_t best = c;
    for (std::size_t i = 0; i < c; ++i) {
      if (chosen[i]) continue;
      if (best == c || better(min_dist[i], i, min_dist[best], best)) best = i;
    }
    take(best);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Signal gather_rows(const Signal& data, const std::vector<std::size_t>& rows) {
  Signal out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(data.rows())) throw RangeError("row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Eigen::MatrixXd idw_weights(const std::vector<Point2>& sources, const std::vector<Point2>& targets,
                            double power) {
  if (sources.empty()) throw ConfigError("interpolation needs at least one source channel");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(targets.size()),
                                            static_cast<Eigen::Index>(sources.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::size_t hit = sources.size();
    for (std::size_t j = 0; j < sources.size(); ++j)
      if (distance(targets[i], sources[j]) < 1e-12) hit = j;
    if (hit < sources.size()) {
      w(r, static_cast<Eigen::Index>(hit)) = 1.0;
      continue;
    }
    for (std::size_t j = 0; j < sources.size(); ++j)
      w(r, static_cast<Eigen::Index>(j)) = 1.0 / std::pow(distance(targets[i], sources[j]), power);
    w.row(r) /= w.row(r).sum();
  }
  return w;
}

Eigen::MatrixXd idw_upsampler(const ChannelLayout& layout, const std::vector<std::size_t>& visible,
                              double power) {
  return idw_weights(layout.subset(visible).positions(), layout.positions(), power);
}

Eigen::MatrixXd nearest_upsampler(const ChannelLayout& layout, const std::vector<std::size_t>& visible) {
  if (visible.empty()) throw ConfigError("interpolation needs at least one source channel");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(layout.size()),
                                            static_cast<Eigen::Index>(visible.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < visible.size(); ++j)
      if (distance(layout.position(i), layout.position(visible[j])) <
          distance(layout.position(i), layout.position(visible[best])))
        best = j;
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)) = 1.0;
  }
  return w;
}

LowDensity make_ld(const EegWindow& hd, double scale, std::uint64_t seed) {
  auto visible = select_visible(hd.layout(), scale, seed);
  EegWindow ld(gather_rows(hd.data(), visible), hd.fs(), hd.layout().subset(visible));
  return {std::move(ld), std::move(visible)};
}

// ---------------------------------------------------------------------------

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

SplitRatios SplitRatios::from_holdout(double test, double val_of_train) {
  const double rest = 1.0 - test;
  return {rest * (1.0 - val_of_train), rest * val_of_train, test};
}

std::vector<std::size_t> DatasetManifest::ids(Split split) const {
  std::vector<std::size_t> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(r.sample_id);
  return out;
}

std::string DatasetManifest::serialize() const {
  std::ostringstream os;
  os << "# seed=" << seed << '\n';
  for (const auto& r : records) {
    os << r.sample_id << '\t' << split_name(r.split) << '\t';
    for (std::size_t i = 0; i < r.visible.size(); ++i) os << (i ? "," : "") << r.visible[i];
    os << '\n';
  }
  return os.str();
}

DatasetManifest DatasetManifest::parse(const std::string& text) {
  DatasetManifest m;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# seed=", 0) == 0) m.seed = std::stoull(line.substr(7));
      continue;
    }
    auto f = split_fields(line, '\t');
    if (f.size() != 3) throw ConfigError("malformed manifest line: " + line);
    ManifestRecord r;
    r.sample_id = std::stoull(f[0]);
    if (f[1] == "train") r.split = Split::kTrain;
    else if (f[1] == "val") r.split = Split::kVal;
    else if (f[1] == "test") r.split = Split::kTest;
    else throw ConfigError("unknown split '" + f[1] + "'");
    for (const auto& v : split_fields(f[2], ','))
      if (!v.empty()) r.visible.push_back(std::stoull(v));
    m.records.push_back(std::move(r));
  }
  return m;
}

DatasetManifest split_dataset(std::size_t n_samples, const SplitRatios& ratios,
                              std::uint64_t seed, const std::vector<std::size_t>& visible) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double v : r)
    if (!(v >= 0.0)) throw ConfigError("split ratios must be nonnegative");
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  const auto bins = static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](double v) { return v > 0; }));
  if (n_samples < bins)
    throw ConfigError("cannot split " + std::to_string(n_samples) + " samples into " +
                      std::to_string(bins) + " bins");

  auto count = [&](double ratio) {
    if (ratio <= 0) return std::size_t{0};
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n_samples))));
  };
  std::size_t n_test = count(ratios.test);
  std::size_t n_val = count(ratios.val);
  if (ratios.train > 0 && n_test + n_val >= n_samples) {
    // keep at least one training sample
    if (n_val > 1) --n_val; else --n_test;
  }
  const std::size_t n_train = n_samples - n_test - n_val;

  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 eng(seed);
  std::shuffle(order.begin(), order.end(), eng);

  DatasetManifest m;
  m.seed = seed;
  m.records.resize(n_samples);
  for (std::size_t pos = 0; pos < n_samples; ++pos) {
    const std::size_t id = order[pos];
    const Split s = pos < n_train ? Split::kTrain : pos < n_train + n_val ? Split::kVal : Split::kTest;
    m.records[id] = {id, s, visible};
  }
  return m;
}

}  // namespace srgdiff
