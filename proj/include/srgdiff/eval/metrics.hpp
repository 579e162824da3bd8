// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "srgdiff/eeg_data.hpp"

namespace srgdiff::eval {

inline constexpr double kSnrCapDb = 120.0;

/// |rec - ref|^2 / |ref|^2.
double nmse(std::span<const double> rec, std::span<const double> ref);
/// Pearson correlation of the flattened inputs.
double pcc(std::span<const double> rec, std::span<const double> ref);
/// 10 log10(|ref|^2 / |ref - rec|^2), capped at kSnrCapDb.
double snr_db(std::span<const double> rec, std::span<const double> ref);

struct MetricsRecord {
  double nmse = 0.0;
  double pcc = 0.0;
  double snr_db = 0.0;
};

/// How SNR is pooled inside one window: over all selected samples at once,
/// or as the mean of per-channel decibel values.
enum class SnrPooling { Window, Channel };

/// Metrics over the given channel rows (all rows when empty).
MetricsRecord window_metrics(const Signal& rec, const Signal& ref, const std::vector<std::size_t>& rows = {},
                             SnrPooling snr_pooling = SnrPooling::Window);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};
MeanStd mean_std(std::span<const double> values);

}  // namespace srgdiff::eval
