// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace srgdiff {

/// Channels x samples, row-major so each channel is contiguous.
using Signal = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

double distance(const Point2& a, const Point2& b);

/// Electrode labels and 2D scalp positions in the unit disc.
class ChannelLayout {
 public:
  ChannelLayout() = default;
  ChannelLayout(std::vector<std::string> names, std::vector<Point2> positions);

  /// n electrodes on a sunflower spiral of radius 0.9, labelled E01..En.
  static ChannelLayout spiral(std::size_t n);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Point2>& positions() const { return positions_; }
  const Point2& position(std::size_t i) const { return positions_.at(i); }

  ChannelLayout subset(const std::vector<std::size_t>& indices) const;

  /// One "name<TAB>x<TAB>y" line per channel.
  std::string serialize() const;
  static ChannelLayout parse(const std::string& text);

  bool operator==(const ChannelLayout&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Point2> positions_;
};

/// Fixed-length multichannel segment in microvolts.
class EegWindow {
 public:
  EegWindow(Signal data, double fs, ChannelLayout layout);

  const Signal& data() const { return data_; }
  double fs() const { return fs_; }
  const ChannelLayout& layout() const { return layout_; }
  std::size_t channels() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(data_.cols()); }

 private:
  Signal data_;
  double fs_;
  ChannelLayout layout_;
};

/// HD window plus the channel subset that stays visible in the LD montage.
struct PairedSample {
  EegWindow hd;
  std::vector<std::size_t> visible;
  double scale;
};

// ---------------------------------------------------------------------------
// Synthetic generator

/// One latent oscillator: a sum of sinusoids with frequencies drawn in
/// [lo_hz, hi_hz].
struct BandSource {
  double lo_hz;
  double hi_hz;
  double amplitude;
};

struct SynthConfig {
  std::size_t n_channels = 16;
  double fs = 200.0;
  double duration = 4.0;  // seconds
  std::uint64_t seed = 0;
  /// Defaults to the five canonical EEG bands.
  std::vector<BandSource> sources = default_sources();
  std::size_t components_per_source = 6;
  /// Per-trial log-normal amplitude jitter applied to each source.
  double amplitude_jitter = 0.0;
  /// RMS of the 1/f background relative to a unit source.
  double noise_amplitude = 0.1;
  /// Seed of the spatial mixing; shared by every trial of one "head".
  std::uint64_t mixing_seed = 7;
  /// Spatial width of the mixing bumps in unit-disc coordinates.
  double mixing_width = 0.35;
  ChannelLayout layout;  // spiral(n_channels) when empty

  static std::vector<BandSource> default_sources();
};

/// Smooth position-dependent mixing matrix (channels x sources).
Eigen::MatrixXd mixing_matrix(const ChannelLayout& layout, std::size_t n_sources,
                              std::uint64_t mixing_seed, double width);

/// Continuous C x (fs * duration) recording.
Signal synth_eeg(const SynthConfig& config);

// ---------------------------------------------------------------------------
// Segmentation, LD construction, splits

std::vector<EegWindow> segment_windows(const Signal& signal, double fs,
                                       const ChannelLayout& layout, double window_seconds,
                                       double hop_seconds);

/// Greedy farthest-point selection of round(C / scale) channels (minimum 1).
/// Ties are broken by a seeded permutation. Returned indices are ascending.
std::vector<std::size_t> select_visible(const ChannelLayout& layout, double scale,
                                        std::uint64_t seed = 0);

struct LowDensity {
  EegWindow ld;
  std::vector<std::size_t> visible;
};

LowDensity make_ld(const EegWindow& hd, double scale, std::uint64_t seed = 0);

/// Row gather of a signal.
Signal gather_rows(const Signal& data, const std::vector<std::size_t>& rows);

/// targets x sources inverse-distance weights (rows sum to 1). A target that
/// coincides with a source copies it.
Eigen::MatrixXd idw_weights(const std::vector<Point2>& sources, const std::vector<Point2>& targets,
                            double power = 2.0);

/// HD x LD interpolation operator for a layout and its visible subset:
/// visible rows copy their channel, masked rows use inverse-distance weights.
Eigen::MatrixXd idw_upsampler(const ChannelLayout& layout, const std::vector<std::size_t>& visible,
                              double power = 2.0);

/// HD x LD operator copying the nearest visible channel.
Eigen::MatrixXd nearest_upsampler(const ChannelLayout& layout, const std::vector<std::size_t>& visible);

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split s);

struct SplitRatios {
  double train = 0.8;
  double val = 0.0;
  double test = 0.2;

  /// Holdout `test`, then move `val_of_train` of the remainder to validation.
  static SplitRatios from_holdout(double test, double val_of_train);
};

struct ManifestRecord {
  std::size_t sample_id;
  Split split;
  std::vector<std::size_t> visible;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::uint64_t seed = 0;

  std::vector<std::size_t> ids(Split split) const;
  std::string serialize() const;
  static DatasetManifest parse(const std::string& text);
};

/// Seeded shuffle of sample ids followed by contiguous assignment.
DatasetManifest split_dataset(std::size_t n_samples, const SplitRatios& ratios,
                              std::uint64_t seed,
                              const std::vector<std::size_t>& visible = {});

}  // namespace srgdiff
