// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace srgdiff::eval {

struct ForestConfig {
  std::size_t n_trees = 100;
  /// Nodes with fewer samples become leaves.
  std::size_t min_leaf = 2;
  /// Candidate features per node; 0 selects round(sqrt(d)).
  std::size_t max_features = 0;
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<int> counts;  // leaf class counts
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  int predict(const double* row) const;
};

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<DecisionTree> trees, std::size_t n_features, int n_classes);

  /// Majority vote; ties go to the smallest class index.
  int predict(const double* row) const;
  std::vector<int> predict(const Eigen::MatrixXd& features) const;

  const std::vector<DecisionTree>& trees() const { return trees_; }
  std::size_t n_features() const { return n_features_; }
  int n_classes() const { return n_classes_; }

  std::string serialize() const;
  std::uint64_t hash() const;

 private:
  std::vector<DecisionTree> trees_;
  std::size_t n_features_ = 0;
  int n_classes_ = 0;
};

/// One bootstrap tree per index, seeded by (config.seed, index); trees are
/// trained in parallel.
ForestModel forest_train(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                         const ForestConfig& config = {});

std::vector<int> forest_predict(const ForestModel& model, const Eigen::MatrixXd& features);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace srgdiff::eval
