#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lapace/classifiers/retrain_pool.hpp"
#include "lapace/data/dataset.hpp"
#include "lapace/lgmvae/model.hpp"
#include "lapace/metrics/metrics.hpp"
#include "lapace/recourse/constraints.hpp"
#include "lapace/recourse/lapace.hpp"

namespace lapace::metrics {

struct EvaluationConfig {
  std::size_t repeats = 5;
  std::size_t test_points = 100;
  int source_label = 0;
  int target_label = 1;
  std::size_t grid_steps = 21;
  std::size_t lof_k = 20;
  std::size_t perturbations = 10;
  double radius = 0.01;
  std::size_t pool_size = 20;
  double pool_fraction = 0.8;
  // Used when no constraint file is given: this many constraints are drawn
  // for the dataset and constraints_per_input of them for every input.
  std::size_t synthetic_constraints = 10;
  std::size_t constraints_per_input = 5;
  recourse::CorrectionConfig correction;
  std::uint64_t seed = 0;
  // Runtime is wall-clock and therefore kept out of the report unless asked.
  bool record_runtime = false;

  nlohmann::json to_json() const;
  static EvaluationConfig from_json(const nlohmann::json& j);
};

struct Summary {
  std::vector<double> values;  // one per repeat
  double mean() const;
  double stddev() const;  // sample standard deviation, 0 for one value
  nlohmann::json to_json() const;
};

struct VariantReport {
  Summary validity;
  Summary proximity;
  Summary plausibility;
  Summary diversity;
  Summary model_robustness;
  Summary input_robustness;
  Summary actionability;
  Summary runtime_seconds;  // path generation and selection per input
};

inline constexpr std::array<recourse::Variant, 3> kVariants{
    recourse::Variant::kFirst, recourse::Variant::kMiddle, recourse::Variant::kLast};

struct MetricsReport {
  EvaluationConfig config;
  std::array<VariantReport, 3> variants;  // first, middle, last
  Summary actionability_constrained;
  Summary actionability_naive;
  Summary tstr_real;
  Summary tstr_synthetic;
  double centroid_accuracy = 0.0;
  std::size_t robustness_excluded = 0;
  std::vector<std::size_t> inputs_per_repeat;
  recourse::ConstraintSpec constraints;

  const VariantReport& variant(recourse::Variant v) const {
    return variants[static_cast<std::size_t>(v)];
  }
  nlohmann::json to_json() const;
  nlohmann::json timing_json() const;
};

// Box and pairwise constraints that the target class satisfies for most of
// its rows: bounds sit at low/high quantiles of the target rows and a pair
// (a, b) is eligible when a >= b holds for at least half of them.
recourse::ConstraintSpec synthetic_constraints(const data::Dataset& data, int target,
                                               std::size_t count, std::uint64_t seed);

struct EvaluationInputs {
  const lgmvae::LgmvaeModel& model;
  const classifiers::Classifier& classifier;
  const data::Dataset& train;  // classifier training split, relabelled
  const data::Dataset& test;   // relabelled
  classifiers::ClassifierSpec trainer;
  std::optional<recourse::ConstraintSpec> constraints;
};

MetricsReport evaluate(const EvaluationInputs& inputs, const EvaluationConfig& config);

}  // namespace lapace::metrics
