// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "srgdiff/eeg_data.hpp"

namespace srgdiff::eval {

inline constexpr std::size_t kTopomapGrid = 64;

/// Row-major grid x grid field over [-1, 1]^2; cells whose centre lies
/// outside the unit disc hold NaN.
struct ScalpField {
  std::size_t grid = kTopomapGrid;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * grid + col]; }
  /// Centre of a cell; row 0 is the top (y = +1).
  static Point2 cell_centre(std::size_t row, std::size_t col, std::size_t grid);
};

/// Inverse-distance (power 2) interpolation of per-channel values.
ScalpField interpolate_scalp(const ChannelLayout& layout, const std::vector<double>& values,
                             std::size_t grid = kTopomapGrid, double power = 2.0);

/// Perceptually ordered 7-stop ramp; u in [0, 1].
std::array<unsigned char, 3> color_ramp(double u);

struct TopomapPanel {
  std::string title;
  ChannelLayout layout;
  std::vector<double> values;  // one per channel of `layout`
};

/// Standalone SVG with panels side by side on a shared color scale.
std::string render_topomap_svg(const std::vector<TopomapPanel>& panels, const std::string& caption = "");

/// Mean band power per channel of a window.
std::vector<double> band_psd(const EegWindow& window, double lo_hz, double hi_hz);

}  // namespace srgdiff::eval
