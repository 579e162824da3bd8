// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/eval/embedder.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "srgdiff/error.hpp"
#include "srgdiff/nn/adam.hpp"
#include "srgdiff/nn/layers.hpp"
#include "srgdiff/nn/ops.hpp"
#include "srgdiff/random.hpp"

namespace srgdiff::eval {

using nn::Tensor;
using nn::Var;

void EmbedderConfig::validate() const {
  if (channels == 0 || length == 0) throw ConfigError("embedder input dimensions must be positive");
  if (classes < 2) throw ConfigError("embedder needs at least 2 classes");
  if (temporal_filters == 0 || spatial_filters == 0 || embed_dim == 0 || temporal_kernel == 0)
    throw ConfigError("embedder layer sizes must be positive");
  if (pool == 0 || length % pool != 0) throw ConfigError("embedder pool must divide the window length");
  if (epochs < 1 || batch_size == 0 || !(lr > 0)) throw ConfigError("embedder training settings must be positive");
}

Embedder::Embedder(EmbedderConfig config) : config_(config), store_(config.seed) {
  config_.validate();
  const auto& c = config_;
  nn::add_conv(store_, "temporal", 1, c.temporal_filters, c.temporal_kernel | 1);
  nn::add_conv(store_, "spatial", c.channels * c.temporal_filters, c.spatial_filters, 1);
  nn::add_norm(store_, "norm1", c.spatial_filters);
  nn::add_conv(store_, "separable", c.spatial_filters, c.spatial_filters, 9);
  nn::add_norm(store_, "norm2", c.spatial_filters);
  nn::add_dense(store_, "embed", c.spatial_filters, c.embed_dim, 1.0);
  nn::add_dense(store_, "head", c.embed_dim, c.classes, 1.0);
}

Var Embedder::embed(nn::Tape& t, Var x) {
  const auto& c = config_;
  const nn::Shape& s = x.shape();
  if (s.size() != 3 || s[1] != c.channels || s[2] != c.length)
    throw ShapeError("embedder expects [B, " + std::to_string(c.channels) + ", " + std::to_string(c.length) +
                     "], got " + nn::to_string(s));
  const std::size_t b = s[0];
  Var h = nn::reshape(x, {b * c.channels, 1, c.length});
  h = nn::conv(t, store_, "temporal", h);
  h = nn::reshape(h, {b, c.channels * c.temporal_filters, c.length});
  h = nn::conv(t, store_, "spatial", h);
  h = nn::silu(nn::norm(t, store_, "norm1", h, c.groups));
  h = nn::avg_pool1d(h, c.pool);
  h = nn::conv(t, store_, "separable", h);
  h = nn::silu(nn::norm(t, store_, "norm2", h, c.groups));
  return nn::tanh(nn::dense(t, store_, "embed", nn::mean_time(h)));
}

Var Embedder::logits(nn::Tape& t, Var embedding) { return nn::dense(t, store_, "head", embedding); }

Eigen::MatrixXd Embedder::embeddings(const Tensor& x, std::size_t chunk) {
  const std::size_t n = x.dim(0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(config_.embed_dim));
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    nn::Tape tape;
    const Tensor e = embed(tape, tape.constant(x.slice_rows(start, end))).value();
    for (std::size_t i = 0; i < end - start; ++i)
      for (std::size_t j = 0; j < config_.embed_dim; ++j)
        out(static_cast<Eigen::Index>(start + i), static_cast<Eigen::Index>(j)) = e[i * config_.embed_dim + j];
  }
  if (config_.unit_norm) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double norm = out.row(i).norm();
      if (norm > 0) out.row(i) /= norm;
    }
  }
  return out;
}

std::vector<int> Embedder::predict(const Tensor& x, std::size_t chunk) {
  const std::size_t n = x.dim(0), k = config_.classes;
  std::vector<int> out(n);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    nn::Tape tape;
    const Tensor z = logits(tape, embed(tape, tape.constant(x.slice_rows(start, end)))).value();
    for (std::size_t i = 0; i < end - start; ++i) {
      const double* row = z.data() + i * k;
      out[start + i] = static_cast<int>(std::max_element(row, row + k) - row);
    }
  }
  return out;
}

EmbedderReport train_embedder(Embedder& model, const Tensor& x, const std::vector<int>& labels) {
  const EmbedderConfig& c = model.config();
  const std::size_t n = x.dim(0);
  if (labels.size() != n) throw ShapeError("embedder: label count does not match windows");
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw ConfigError("embedder: training data has a single class");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= c.classes)
      throw ConfigError("embedder: label " + std::to_string(l) + " outside [0, " + std::to_string(c.classes) + ")");

  auto& store = model.params();
  store.set_frozen(false);
  nn::Adam opt({.lr = c.lr});
  EmbedderReport report;
  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(c.seed, {31, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += c.batch_size) {
      const std::size_t end = std::min(n, start + c.batch_size);
      std::vector<std::size_t> rows(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
      std::vector<int> batch_labels;
      for (std::size_t r : rows) batch_labels.push_back(labels[r]);
      store.zero_grad();
      nn::Tape tape;
      Var loss = nn::softmax_cross_entropy(model.logits(tape, model.embed(tape, tape.constant(nn::take_rows(x, rows)))),
                                           batch_labels);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) throw NumericalError("embedder: non-finite loss at epoch " + std::to_string(epoch));
      tape.backward(loss);
      opt.step(store);
      total += value * static_cast<double>(rows.size());
    }
    report.epoch_loss.push_back(total / static_cast<double>(n));
  }
  store.set_frozen(true);
  const auto predicted = model.predict(x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += predicted[i] == labels[i];
  report.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
  return report;
}

}  // namespace srgdiff::eval
