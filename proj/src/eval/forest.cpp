// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/eval/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "srgdiff/error.hpp"
#include "srgdiff/parallel.hpp"
#include "srgdiff/random.hpp"

namespace srgdiff::eval {

namespace {

int argmax_smallest(const std::vector<int>& counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    s += p * p;
  }
  return 1.0 - s;
}

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const std::vector<int>& y;
  int n_classes;
  std::size_t min_leaf;
  std::size_t max_features;
  Rng rng;
  DecisionTree tree;

  std::vector<int> class_counts(const std::vector<std::size_t>& idx) const {
    std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i : idx) ++counts[static_cast<std::size_t>(y[i])];
    return counts;
  }

  int make_leaf(std::vector<int> counts) {
    TreeNode node;
    node.counts = std::move(counts);
    tree.nodes.push_back(std::move(node));
    return static_cast<int>(tree.nodes.size() - 1);
  }

  int build(std::vector<std::size_t> idx) {
    std::vector<int> counts = class_counts(idx);
    const auto nonzero = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; });
    if (nonzero <= 1 || idx.size() < min_leaf) return make_leaf(std::move(counts));

    const std::size_t d = static_cast<std::size_t>(x.cols());
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng.engine());
    features.resize(std::min(max_features, d));

    const int total = static_cast<int>(idx.size());
    double best_score = gini(counts, total);
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> column(idx.size());
    for (std::size_t f : features) {
      for (std::size_t k = 0; k < idx.size(); ++k)
        column[k] = {x(static_cast<Eigen::Index>(idx[k]), static_cast<Eigen::Index>(f)), y[idx[k]]};
      std::sort(column.begin(), column.end());
      std::vector<int> left(static_cast<std::size_t>(n_classes), 0), right = counts;
      for (int k = 0; k + 1 < total; ++k) {
        ++left[static_cast<std::size_t>(column[k].second)];
        --right[static_cast<std::size_t>(column[k].second)];
        if (column[k].first == column[k + 1].first) continue;
        const int nl = k + 1, nr = total - nl;
        const double score = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
        if (score < best_score - 1e-12) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (column[k].first + column[k + 1].first);
        }
      }
    }
    if (best_feature < 0) return make_leaf(std::move(counts));

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx)
      (x(static_cast<Eigen::Index>(i), best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
    const int self = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[self].feature = best_feature;
    tree.nodes[self].threshold = best_threshold;
    const int l = build(std::move(left_idx));
    const int r = build(std::move(right_idx));
    tree.nodes[self].left = l;
    tree.nodes[self].right = r;
    return self;
  }
};

}  // namespace

int DecisionTree::predict(const double* row) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return argmax_smallest(nodes[static_cast<std::size_t>(node)].counts);
}

ForestModel::ForestModel(std::vector<DecisionTree> trees, std::size_t n_features, int n_classes)
    : trees_(std::move(trees)), n_features_(n_features), n_classes_(n_classes) {}

int ForestModel::predict(const double* row) const {
  std::vector<int> votes(static_cast<std::size_t>(n_classes_), 0);
  for (const DecisionTree& t : trees_) ++votes[static_cast<std::size_t>(t.predict(row))];
  return argmax_smallest(votes);
}

std::vector<int> ForestModel::predict(const Eigen::MatrixXd& features) const {
  if (static_cast<std::size_t>(features.cols()) != n_features_)
    throw ShapeError("forest_predict: expected " + std::to_string(n_features_) + " features, got " +
                     std::to_string(features.cols()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = features;
  std::vector<int> out(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(rows.row(i).data());
  return out;
}

std::string ForestModel::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << "forest " << trees_.size() << ' ' << n_features_ << ' ' << n_classes_ << '\n';
  for (const DecisionTree& t : trees_) {
    os << "tree " << t.nodes.size() << '\n';
    for (const TreeNode& n : t.nodes) {
      if (n.feature >= 0) {
        os << "split " << n.feature << ' ' << n.threshold << ' ' << n.left << ' ' << n.right << '\n';
      } else {
        os << "leaf";
        for (int c : n.counts) os << ' ' << c;
        os << '\n';
      }
    }
  }
  return os.str();
}

std::uint64_t ForestModel::hash() const {
  // FNV-1a over the serialized form.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : serialize()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

ForestModel forest_train(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                         const ForestConfig& config) {
  const std::size_t n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw ShapeError("forest_train: label count does not match feature rows");
  if (n < 2) throw ConfigError("forest_train: need at least 2 samples");
  if (config.n_trees == 0) throw ConfigError("forest_train: n_trees must be positive");
  if (!features.allFinite()) throw NumericalError("forest_train: non-finite features");
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw ConfigError("forest_train: labels must be non-negative");
    max_label = std::max(max_label, l);
  }
  std::vector<int> seen(static_cast<std::size_t>(max_label + 1), 0);
  for (int l : labels) seen[static_cast<std::size_t>(l)] = 1;
  if (std::accumulate(seen.begin(), seen.end(), 0) < 2) throw ConfigError("forest_train: need at least 2 classes");

  const std::size_t d = static_cast<std::size_t>(features.cols());
  const std::size_t max_features =
      config.max_features > 0 ? config.max_features
                              : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(double(d)))));
  std::vector<DecisionTree> trees(config.n_trees);
  parallel_for(config.n_trees, [&](std::size_t t) {
    TreeBuilder builder{features, labels, max_label + 1, std::max<std::size_t>(2, config.min_leaf), max_features,
                        Rng(derive_seed(config.seed, {t})), {}};
    std::vector<std::size_t> boot(n);
    for (std::size_t& b : boot) b = static_cast<std::size_t>(builder.rng.integer(0, static_cast<std::int64_t>(n) - 1));
    builder.build(std::move(boot));
    trees[t] = std::move(builder.tree);
  });
  return ForestModel(std::move(trees), d, max_label + 1);
}

std::vector<int> forest_predict(const ForestModel& model, const Eigen::MatrixXd& features) {
  return model.predict(features);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw ShapeError("accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace srgdiff::eval
