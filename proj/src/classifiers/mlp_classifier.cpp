#include "lapace/classifiers/mlp_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "lapace/diffmath/adam.hpp"
#include "lapace/error.hpp"

namespace lapace::classifiers {

using diffmath::Tape;
using diffmath::Var;

MlpClassifier::MlpClassifier(diffmath::MLP network, std::size_t num_classes)
    : network_(std::move(network)), num_classes_(num_classes) {
  if (network_.output_width() != num_classes_) {
    throw ShapeError("mlp classifier: network emits " + std::to_string(network_.output_width()) +
                     " logits for " + std::to_string(num_classes_) + " classes");
  }
}

Tensor MlpClassifier::predict_proba_batch(const Tensor& X) const {
  check_width(X.cols());
  Tape tape;
  const auto bound = network_.bind(tape, false);
  return diffmath::softmax_rows(diffmath::forward(bound, tape.constant(X))).value();
}

std::vector<double> MlpClassifier::predict_proba(std::span<const double> x) const {
  const Tensor probs = predict_proba_batch(Tensor::row(x));
  return probs.storage();
}

MlpClassifier train_mlp_classifier(const Tensor& X, std::span<const int> labels,
                                   std::size_t num_classes, const MlpClassifierConfig& config) {
  if (X.rows() == 0) throw ValidationError("mlp classifier: empty training set");
  if (labels.size() != X.rows()) throw ShapeError("mlp classifier: label count mismatch");
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw ValidationError("mlp classifier: training data contains a single class");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw ValidationError("mlp classifier: label out of range");
    }
  }
  if (config.batch_size == 0) throw ConfigError("mlp classifier: batch size must be positive");

  std::mt19937_64 rng(config.seed);
  auto network = diffmath::MLP::make(X.cols(), config.hidden, num_classes,
                                     diffmath::Activation::kRelu,
                                     diffmath::Activation::kLinear, rng);
  diffmath::AdamState adam;
  adam.config.learning_rate = config.learning_rate;
  auto params = network.parameters();

  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Tensor batch = Tensor::zeros(end - start, X.cols());
      std::vector<int> batch_labels;
      for (std::size_t k = start; k < end; ++k) {
        const auto src = X.row_span(order[k]);
        std::copy(src.begin(), src.end(), batch.row_span(k - start).begin());
        batch_labels.push_back(labels[order[k]]);
      }
      Tape tape;
      const auto bound = network.bind(tape, true);
      Var loss = diffmath::softmax_cross_entropy(diffmath::forward(bound, tape.constant(batch)),
                                                 batch_labels);
      if (!std::isfinite(loss.value()[0])) {
        throw NumericError("mlp classifier: non-finite loss at epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      const auto grads = diffmath::gradients(bound);
      diffmath::adam_step(params, grads, adam);
    }
  }
  return MlpClassifier(std::move(network), num_classes);
}

MlpClassifier train_mlp_classifier(const data::Dataset& train, const MlpClassifierConfig& config) {
  return train_mlp_classifier(train.X, train.y_star, train.schema.num_classes(), config);
}

}  // namespace lapace::classifiers
