#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lapace/classifiers/classifier.hpp"
#include "lapace/diffmath/mlp.hpp"

namespace lapace::classifiers {

struct MlpClassifierConfig {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

// Softmax-headed MLP. The stored network emits logits; probabilities are the
// row softmax of those logits.
class MlpClassifier final : public Classifier {
 public:
  MlpClassifier(diffmath::MLP network, std::size_t num_classes);

  std::string kind() const override { return "mlp"; }
  std::size_t input_width() const override { return network_.input_width(); }
  std::size_t num_classes() const override { return num_classes_; }
  std::vector<double> predict_proba(std::span<const double> x) const override;
  Tensor predict_proba_batch(const Tensor& X) const override;

  const diffmath::MLP& network() const { return network_; }

 private:
  diffmath::MLP network_;
  std::size_t num_classes_;
};

MlpClassifier train_mlp_classifier(const Tensor& X, std::span<const int> labels,
                                   std::size_t num_classes, const MlpClassifierConfig& config);
MlpClassifier train_mlp_classifier(const data::Dataset& train, const MlpClassifierConfig& config);

}  // namespace lapace::classifiers
