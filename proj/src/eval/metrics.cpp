// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/eval/metrics.hpp"

#include <cmath>

#include "srgdiff/error.hpp"

namespace srgdiff::eval {

namespace {

void require_same(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size() || a.empty())
    throw ShapeError(std::string(what) + ": inputs must be non-empty and equally sized");
}

}  // namespace

double nmse(std::span<const double> rec, std::span<const double> ref) {
  require_same(rec, ref, "nmse");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    num += (rec[i] - ref[i]) * (rec[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  if (!(den > 0)) throw NumericalError("nmse: reference has zero norm");
  return num / den;
}

double pcc(std::span<const double> rec, std::span<const double> ref) {
  require_same(rec, ref, "pcc");
  const double n = static_cast<double>(rec.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    ma += rec[i];
    mb += ref[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    cov += (rec[i] - ma) * (ref[i] - mb);
    va += (rec[i] - ma) * (rec[i] - ma);
    vb += (ref[i] - mb) * (ref[i] - mb);
  }
  if (!(va > 0) || !(vb > 0)) throw NumericalError("pcc: zero variance");
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

double snr_db(std::span<const double> rec, std::span<const double> ref) {
  require_same(rec, ref, "snr");
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    sig += ref[i] * ref[i];
    err += (ref[i] - rec[i]) * (ref[i] - rec[i]);
  }
  if (err == 0.0) return kSnrCapDb;
  if (sig == 0.0) return -kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(sig / err));
}

MetricsRecord window_metrics(const Signal& rec, const Signal& ref, const std::vector<std::size_t>& rows,
                             SnrPooling snr_pooling) {
  if (rec.rows() != ref.rows() || rec.cols() != ref.cols())
    throw ShapeError("metrics: reconstruction and reference shapes differ");
  Signal a = rows.empty() ? rec : gather_rows(rec, rows);
  Signal b = rows.empty() ? ref : gather_rows(ref, rows);
  std::span<const double> sa(a.data(), static_cast<std::size_t>(a.size()));
  std::span<const double> sb(b.data(), static_cast<std::size_t>(b.size()));
  MetricsRecord out{nmse(sa, sb), pcc(sa, sb), snr_db(sa, sb)};
  if (snr_pooling == SnrPooling::Channel) {
    const auto cols = static_cast<std::size_t>(a.cols());
    double total = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) total += snr_db({a.row(r).data(), cols}, {b.row(r).data(), cols});
    out.snr_db = total / static_cast<double>(a.rows());
  }
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw ConfigError("mean of an empty set");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

}  // namespace srgdiff::eval
