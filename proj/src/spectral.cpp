// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/spectral.hpp"

#include <cmath>
#include <numbers>

#include "srgdiff/error.hpp"

namespace srgdiff::spectral {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw ConfigError("FFT length " + std::to_string(n) + " is not a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    // Twiddles computed directly rather than by recurrence to keep the
    // error flat for long transforms.
    std::vector<Complex> w(half);
    for (std::size_t k = 0; k < half; ++k)
      w[k] = Complex(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * w[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

std::vector<Complex> rfft(std::span<const double> x, std::size_t n) {
  if (!is_power_of_two(n)) throw ConfigError("FFT length " + std::to_string(n) + " is not a power of two");
  if (x.size() > n) throw ConfigError("rfft input longer than the transform length");
  std::vector<Complex> a(n);
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i];
  fft_inplace(a);
  a.resize(n / 2 + 1);
  return a;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n <= 1) return w;
  for (std::size_t j = 0; j < n; ++j)
    w[j] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n - 1));
  return w;
}

Spectrogram stft(std::span<const double> x, double fs, std::size_t win_len, std::size_t fft_len,
                 std::size_t hop) {
  if (win_len == 0 || win_len > fft_len) throw ConfigError("STFT needs 0 < win_len <= fft_len");
  if (!is_power_of_two(fft_len)) throw ConfigError("FFT length " + std::to_string(fft_len) + " is not a power of two");
  if (hop == 0) hop = win_len;
  Spectrogram s;
  s.fs = fs;
  s.win_len = win_len;
  s.fft_len = fft_len;
  s.bins = fft_len / 2 + 1;
  if (x.size() < win_len) return s;
  s.frames = (x.size() - win_len) / hop + 1;
  s.magnitudes.resize(s.frames * s.bins);
  const auto w = hann_window(win_len);
  std::vector<double> frame(win_len);
  for (std::size_t f = 0; f < s.frames; ++f) {
    for (std::size_t j = 0; j < win_len; ++j) frame[j] = w[j] * x[f * hop + j];
    const auto spec = rfft(frame, fft_len);
    for (std::size_t k = 0; k < s.bins; ++k) s.magnitudes[f * s.bins + k] = std::abs(spec[k]);
  }
  return s;
}

const std::vector<BandDef>& canonical_bands() {
  static const std::vector<BandDef> bands = {
      {"delta", 1.0, 3.0}, {"theta", 4.0, 7.0}, {"alpha", 8.0, 13.0}, {"beta", 14.0, 30.0}, {"gamma", 31.0, 50.0}};
  return bands;
}

BandPower band_power(const Spectrogram& spec, const BandDef& band) {
  if (!(band.lo >= 0 && band.lo < band.hi && band.hi <= spec.fs / 2 + 1e-12))
    throw ConfigError("band '" + band.name + "' outside [0, fs/2]");
  const double df = spec.fs / static_cast<double>(spec.fft_len);
  BandPower bp{0.0, 0};
  std::size_t k0 = spec.bins, k1 = 0;
  for (std::size_t k = 0; k < spec.bins; ++k) {
    const double f = static_cast<double>(k) * df;
    if (f >= band.lo && f <= band.hi) {
      k0 = std::min(k0, k);
      k1 = k;
      ++bp.bins;
    }
  }
  if (bp.bins == 0) throw ConfigError("empty band '" + band.name + "'");
  if (spec.frames == 0) return bp;
  for (std::size_t f = 0; f < spec.frames; ++f)
    for (std::size_t k = k0; k <= k1; ++k) bp.energy += spec.at(f, k) * spec.at(f, k);
  bp.energy /= static_cast<double>(spec.frames);
  return bp;
}

namespace {

template <typename Fn>
Eigen::MatrixXd band_feature(const EegWindow& window, const std::vector<BandDef>& bands, Fn fn) {
  const double seg = window.fs();
  if (std::abs(seg - std::round(seg)) > 1e-9 || static_cast<std::size_t>(std::llround(seg)) != window.length())
    throw ConfigError("band features need one-second segments (" + std::to_string(window.length()) +
                      " samples at fs=" + std::to_string(window.fs()) + ")");
  const std::size_t win = window.length();
  const std::size_t nfft = next_power_of_two(win);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(window.channels()), static_cast<Eigen::Index>(bands.size()));
  for (std::size_t c = 0; c < window.channels(); ++c) {
    const auto row = window.data().row(static_cast<Eigen::Index>(c));
    const Spectrogram s = stft(std::span<const double>(row.data(), win), window.fs(), win, nfft, win);
    for (std::size_t b = 0; b < bands.size(); ++b) {
      const BandPower bp = band_power(s, bands[b]);
      out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(b)) = fn(bp);
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd de_feature(const EegWindow& window, const std::vector<BandDef>& bands) {
  return band_feature(window, bands, [](const BandPower& bp) {
    return std::log((bp.energy + kStabilityEps) / static_cast<double>(bp.bins));
  });
}

Eigen::MatrixXd psd_feature(const EegWindow& window, const std::vector<BandDef>& bands) {
  return band_feature(window, bands,
                      [](const BandPower& bp) { return bp.energy / static_cast<double>(bp.bins); });
}

}  // namespace srgdiff::spectral
