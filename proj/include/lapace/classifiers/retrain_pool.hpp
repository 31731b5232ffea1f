#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lapace/classifiers/classifier.hpp"
#include "lapace/classifiers/mlp_classifier.hpp"
#include "lapace/classifiers/random_forest.hpp"

namespace lapace::classifiers {

enum class ClassifierKind { kMlp, kRandomForest };

const char* to_string(ClassifierKind kind);
ClassifierKind classifier_kind_from_string(const std::string& name);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::kRandomForest;
  MlpClassifierConfig mlp;
  ForestConfig forest;
};

std::shared_ptr<Classifier> train_classifier(const Tensor& X, std::span<const int> labels,
                                             std::size_t num_classes, const ClassifierSpec& spec);

struct RetrainPool {
  std::vector<std::shared_ptr<Classifier>> members;
  double subset_fraction = 0.8;
  std::vector<std::uint64_t> subset_seeds;

  std::size_t size() const { return members.size(); }
};

// Every member is trained with `base` on its own seeded subsample (without
// replacement, original row order kept) of the dataset. Members use the
// base trainer seed, so with subset_fraction == 1 they equal the base model.
RetrainPool build_retrain_pool(const data::Dataset& dataset, const ClassifierSpec& base,
                               std::size_t pool_size, double subset_fraction, std::uint64_t seed);

}  // namespace lapace::classifiers
