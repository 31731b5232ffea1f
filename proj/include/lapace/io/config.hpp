#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "lapace/classifiers/retrain_pool.hpp"
#include "lapace/data/dataset.hpp"
#include "lapace/lgmvae/model.hpp"
#include "lapace/metrics/evaluate.hpp"
#include "lapace/recourse/lapace.hpp"

namespace lapace::io {

nlohmann::json to_json(const classifiers::ClassifierSpec& spec);
classifiers::ClassifierSpec classifier_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const lgmvae::LgmvaeConfig& config);
lgmvae::LgmvaeConfig lgmvae_config_from_json(const nlohmann::json& j);

// One file describes a whole run. Component seeds are derived from `seed`.
struct RunConfig {
  std::string data_path;
  std::string schema_path;
  std::vector<double> split{0.8, 0.2};  // train, test
  classifiers::ClassifierSpec classifier;
  lgmvae::LgmvaeConfig lgmvae;
  std::size_t grid_steps = 21;
  std::optional<std::string> constraints_path;
  recourse::CorrectionConfig correction;
  metrics::EvaluationConfig evaluation;
  std::uint64_t seed = 0;

  // Relative paths are resolved against the directory of the config file.
  static RunConfig load(const std::string& path);
  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
  nlohmann::json to_json() const;

  data::SplitSpec split_spec() const;
};

struct RunData {
  data::TabularSchema schema;
  data::Dataset train;
  data::Dataset test;
};

// Reads and splits the CSV. An unfitted schema is fitted on the train split.
RunData load_run_data(const RunConfig& config);

}  // namespace lapace::io
