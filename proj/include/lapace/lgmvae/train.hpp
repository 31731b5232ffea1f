#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "lapace/classifiers/classifier.hpp"
#include "lapace/data/dataset.hpp"
#include "lapace/lgmvae/model.hpp"

namespace lapace::lgmvae {

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the untrained model
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  LgmvaeModel model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Fits on dataset.predicted(). A validation_fraction of the rows is held out
// for early stopping.
TrainResult train(const data::Dataset& dataset, const LgmvaeConfig& config,
                  const EpochCallback& on_epoch = {});

struct CentroidCheck {
  std::size_t cluster = 0;
  int assigned_label = 0;
  int predicted_label = 0;
  bool ok() const { return assigned_label == predicted_label; }
};

// Classifies every decoded centroid. Accuracy is the fraction of clusters
// whose decode lands in the cluster's own class.
std::vector<CentroidCheck> check_centroids(const LgmvaeModel& model,
                                           const classifiers::Classifier& classifier);
double centroid_accuracy(const LgmvaeModel& model, const classifiers::Classifier& classifier);

// Sets model.recourse_ready and returns the failing clusters.
std::vector<CentroidCheck> validate_centroids(LgmvaeModel& model,
                                              const classifiers::Classifier& classifier);

}  // namespace lapace::lgmvae
