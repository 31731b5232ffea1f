#include "lapace/classifiers/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lapace/error.hpp"
#include "lapace/seeding.hpp"

namespace lapace::classifiers {

namespace {

double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double acc = 1.0;
  for (double c : counts) {
    const double p = c / total;
    acc -= p * p;
  }
  return acc;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Tensor& X, std::span<const int> labels, std::size_t num_classes,
              const ForestConfig& config, std::mt19937_64& rng)
      : X_(X), labels_(labels), num_classes_(num_classes), config_(config), rng_(rng) {
    const auto d = static_cast<double>(X.cols());
    features_per_node_ = std::min<std::size_t>(X.cols(), static_cast<std::size_t>(std::ceil(std::sqrt(d))));
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    DecisionTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  std::vector<double> counts_of(std::span<const std::size_t> rows) const {
    std::vector<double> counts(num_classes_, 0.0);
    for (std::size_t r : rows) counts[static_cast<std::size_t>(labels_[r])] += 1.0;
    return counts;
  }

  int grow(DecisionTree& tree, std::vector<std::size_t> rows, std::size_t depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    auto counts = counts_of(rows);
    const double total = static_cast<double>(rows.size());
    const double impurity = gini(counts, total);
    tree.nodes[static_cast<std::size_t>(id)].class_counts = counts;

    if (depth >= config_.max_depth || rows.size() < config_.min_samples_split || impurity == 0.0) {
      return id;
    }
    const SplitChoice best = best_split(rows, counts);
    if (best.feature < 0 || best.impurity >= impurity) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (X_(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, std::move(left), depth + 1);
    const int rgt = grow(tree, std::move(right), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }

  SplitChoice best_split(std::span<const std::size_t> rows, const std::vector<double>& counts) {
    std::vector<std::size_t> candidates(X_.cols());
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k entries become the node's feature subset.
    for (std::size_t i = 0; i < features_per_node_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick(rng_)]);
    }
    candidates.resize(features_per_node_);

    SplitChoice best;
    best.impurity = std::numeric_limits<double>::infinity();
    const double total = static_cast<double>(rows.size());
    std::vector<std::pair<double, int>> column(rows.size());
    std::vector<double> left(num_classes_), right(num_classes_);
    for (std::size_t f : candidates) {
      for (std::size_t k = 0; k < rows.size(); ++k) {
        column[k] = {X_(rows[k], f), labels_[rows[k]]};
      }
      std::sort(column.begin(), column.end());
      std::fill(left.begin(), left.end(), 0.0);
      right = counts;
      for (std::size_t k = 0; k + 1 < column.size(); ++k) {
        const auto y = static_cast<std::size_t>(column[k].second);
        left[y] += 1.0;
        right[y] -= 1.0;
        if (column[k].first == column[k + 1].first) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = total - nl;
        const double weighted = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
        if (weighted < best.impurity) {
          best.impurity = weighted;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (column[k].first + column[k + 1].first);
        }
      }
    }
    return best;
  }

  const Tensor& X_;
  std::span<const int> labels_;
  std::size_t num_classes_;
  const ForestConfig& config_;
  std::mt19937_64& rng_;
  std::size_t features_per_node_ = 1;
};

}  // namespace

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  const TreeNode* node = &nodes.at(0);
  while (node->feature >= 0) {
    const auto f = static_cast<std::size_t>(node->feature);
    node = &nodes[static_cast<std::size_t>(x[f] <= node->threshold ? node->left : node->right)];
  }
  return *node;
}

int DecisionTree::predict(std::span<const double> x) const {
  return argmax_lowest(leaf_for(x).class_counts);
}

RandomForest::RandomForest(std::vector<DecisionTree> trees, std::size_t input_width,
                           std::size_t num_classes)
    : trees_(std::move(trees)), input_width_(input_width), num_classes_(num_classes) {
  if (trees_.empty()) throw ValidationError("random forest needs at least one tree");
}

std::vector<double> RandomForest::predict_proba(std::span<const double> x) const {
  check_width(x.size());
  std::vector<double> votes(num_classes_, 0.0);
  for (const auto& tree : trees_) votes[static_cast<std::size_t>(tree.predict(x))] += 1.0;
  for (double& v : votes) v /= static_cast<double>(trees_.size());
  return votes;
}

RandomForest train_random_forest(const Tensor& X, std::span<const int> labels,
                                 std::size_t num_classes, const ForestConfig& config) {
  if (config.n_trees == 0) throw ConfigError("random forest: n_trees must be >= 1");
  if (X.rows() == 0) throw ValidationError("random forest: empty training set");
  if (labels.size() != X.rows()) throw ShapeError("random forest: label count mismatch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw ValidationError("random forest: label out of range");
    }
  }
  std::vector<DecisionTree> trees;
  trees.reserve(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    std::mt19937_64 rng(derive_seed(config.seed, t));
    std::vector<std::size_t> rows(X.rows());
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, X.rows() - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    TreeBuilder builder(X, labels, num_classes, config, rng);
    trees.push_back(builder.build(std::move(rows)));
  }
  return RandomForest(std::move(trees), X.cols(), num_classes);
}

RandomForest train_random_forest(const data::Dataset& train, const ForestConfig& config) {
  return train_random_forest(train.X, train.y_star, train.schema.num_classes(), config);
}

}  // namespace lapace::classifiers
