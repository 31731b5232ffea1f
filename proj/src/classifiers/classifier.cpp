#include "lapace/classifiers/classifier.hpp"

#include "lapace/error.hpp"

namespace lapace::classifiers {

int argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

void Classifier::check_width(std::size_t width) const {
  if (width != input_width()) {
    throw ShapeError(kind() + " classifier expects " + std::to_string(input_width()) +
                     " features, got " + std::to_string(width));
  }
}

Tensor Classifier::predict_proba_batch(const Tensor& X) const {
  check_width(X.cols());
  Tensor out = Tensor::zeros(X.rows(), num_classes());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto p = predict_proba(X.row_span(i));
    std::copy(p.begin(), p.end(), out.row_span(i).begin());
  }
  return out;
}

int Classifier::predict(std::span<const double> x) const {
  return argmax_lowest(predict_proba(x));
}

std::vector<int> Classifier::predict_batch(const Tensor& X) const {
  const Tensor probs = predict_proba_batch(X);
  std::vector<int> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = argmax_lowest(probs.row_span(i));
  return out;
}

double accuracy(const Classifier& classifier, const Tensor& X, std::span<const int> labels) {
  if (labels.size() != X.rows()) throw ShapeError("accuracy: label count mismatch");
  if (labels.empty()) return 0.0;
  const auto pred = classifier.predict_batch(X);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

data::Dataset relabel_with_classifier(const data::Dataset& dataset, const Classifier& classifier) {
  if (classifier.input_width() != dataset.width()) {
    throw ShapeError("relabel: classifier expects " + std::to_string(classifier.input_width()) +
                     " features, dataset has " + std::to_string(dataset.width()));
  }
  data::Dataset out = dataset;
  out.y_pred = classifier.predict_batch(dataset.X);
  return out;
}

}  // namespace lapace::classifiers
