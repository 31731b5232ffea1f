#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lapace/data/dataset.hpp"
#include "lapace/diffmath/tensor.hpp"

namespace lapace::classifiers {

using diffmath::Tensor;

// Black-box prediction contract. Everything downstream of a trained
// classifier only calls through this interface.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t input_width() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual bool has_probabilities() const { return true; }

  virtual std::vector<double> predict_proba(std::span<const double> x) const = 0;
  // Row-wise probabilities for an N x d matrix.
  virtual Tensor predict_proba_batch(const Tensor& X) const;

  // argmax of predict_proba, ties broken towards the lowest class index.
  virtual int predict(std::span<const double> x) const;
  std::vector<int> predict_batch(const Tensor& X) const;

 protected:
  void check_width(std::size_t width) const;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

int argmax_lowest(std::span<const double> values);

double accuracy(const Classifier& classifier, const Tensor& X, std::span<const int> labels);

// Copy of `dataset` whose y_pred holds classifier predictions for every row.
data::Dataset relabel_with_classifier(const data::Dataset& dataset, const Classifier& classifier);

}  // namespace lapace::classifiers
