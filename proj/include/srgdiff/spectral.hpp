// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srgdiff/eeg_data.hpp"

namespace srgdiff::spectral {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// Iterative radix-2 transform, unnormalized in both directions.
/// inverse=true uses exp(+2*pi*i*j*k/n).
void fft_inplace(std::vector<Complex>& a, bool inverse = false);

/// First n/2+1 DFT bins of x zero-padded to n.
std::vector<Complex> rfft(std::span<const double> x, std::size_t n);

/// Symmetric Hann window, w[j] = 0.5 - 0.5 cos(2 pi j / (n - 1)).
std::vector<double> hann_window(std::size_t n);

struct Spectrogram {
  std::vector<double> magnitudes;  // frames x bins, row-major
  std::size_t frames = 0;
  std::size_t bins = 0;
  double fs = 0.0;
  std::size_t win_len = 0;
  std::size_t fft_len = 0;

  double at(std::size_t frame, std::size_t bin) const { return magnitudes[frame * bins + bin]; }
};

/// Hann-windowed magnitude STFT. hop == 0 means hop = win_len.
Spectrogram stft(std::span<const double> x, double fs, std::size_t win_len = 200,
                 std::size_t fft_len = 256, std::size_t hop = 0);

struct BandDef {
  std::string name;
  double lo;
  double hi;
};

/// delta 1-3, theta 4-7, alpha 8-13, beta 14-30, gamma 31-50 Hz.
const std::vector<BandDef>& canonical_bands();

struct BandPower {
  double energy;     // mean over frames of the summed squared magnitudes
  std::size_t bins;  // bins whose centre frequency lies in [lo, hi]
};

BandPower band_power(const Spectrogram& spec, const BandDef& band);

inline constexpr double kStabilityEps = 1e-8;

/// Channels x bands log(E/N) features of a one-second window.
Eigen::MatrixXd de_feature(const EegWindow& window,
                           const std::vector<BandDef>& bands = canonical_bands());
/// Channels x bands average band power E/N.
Eigen::MatrixXd psd_feature(const EegWindow& window,
                            const std::vector<BandDef>& bands = canonical_bands());

}  // namespace srgdiff::spectral
