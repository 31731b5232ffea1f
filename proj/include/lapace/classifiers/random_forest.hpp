#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lapace/classifiers/classifier.hpp"

namespace lapace::classifiers {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x[feature] <= threshold go left
  int left = -1;
  int right = -1;
  std::vector<double> class_counts;  // training rows routed here, per class
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
};

struct ForestConfig {
  std::size_t n_trees = 50;
  std::size_t max_depth = 8;
  std::size_t min_samples_split = 2;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

// CART forest with Gini splits over ceil(sqrt(d)) random features per node.
// Each tree casts one vote; probabilities are vote fractions.
class RandomForest final : public Classifier {
 public:
  RandomForest(std::vector<DecisionTree> trees, std::size_t input_width, std::size_t num_classes);

  std::string kind() const override { return "random_forest"; }
  std::size_t input_width() const override { return input_width_; }
  std::size_t num_classes() const override { return num_classes_; }
  std::vector<double> predict_proba(std::span<const double> x) const override;

  const std::vector<DecisionTree>& trees() const { return trees_; }

 private:
  std::vector<DecisionTree> trees_;
  std::size_t input_width_;
  std::size_t num_classes_;
};

RandomForest train_random_forest(const Tensor& X, std::span<const int> labels,
                                 std::size_t num_classes, const ForestConfig& config);
RandomForest train_random_forest(const data::Dataset& train, const ForestConfig& config);

}  // namespace lapace::classifiers
