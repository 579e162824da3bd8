// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "srgdiff/nn/param_store.hpp"
#include "srgdiff/nn/tape.hpp"
#include "srgdiff/nn/tensor.hpp"

namespace srgdiff::eval {

struct EmbedderConfig {
  std::size_t channels = 16;
  std::size_t length = 200;
  std::size_t classes = 2;
  std::size_t temporal_filters = 8;
  std::size_t temporal_kernel = 25;
  std::size_t spatial_filters = 16;
  std::size_t pool = 4;
  std::size_t embed_dim = 256;
  std::size_t groups = 4;
  int epochs = 20;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 3;
  /// embeddings() returns rows scaled to unit Euclidean norm, which makes
  /// Frechet distances independent of the activation scale.
  bool unit_norm = true;

  void validate() const;
};

/// Small conv classifier: per-channel temporal filters, a spatial mix over
/// channels and filters, pooling, a second temporal conv, global average
/// pooling, then the embedding layer and a linear head.
class Embedder {
 public:
  explicit Embedder(EmbedderConfig config);

  const EmbedderConfig& config() const { return config_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  /// x: [B, channels, length] -> [B, embed_dim].
  nn::Var embed(nn::Tape& t, nn::Var x);
  nn::Var logits(nn::Tape& t, nn::Var embedding);

  /// Rows are samples; computed in chunks without gradients.
  Eigen::MatrixXd embeddings(const nn::Tensor& x, std::size_t chunk = 64);
  std::vector<int> predict(const nn::Tensor& x, std::size_t chunk = 64);

 private:
  EmbedderConfig config_;
  nn::ParamStore store_;
};

struct EmbedderReport {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

/// Trains on labelled windows and freezes the parameters. Requires at least
/// two distinct labels in [0, classes).
EmbedderReport train_embedder(Embedder& model, const nn::Tensor& x, const std::vector<int>& labels);

}  // namespace srgdiff::eval
