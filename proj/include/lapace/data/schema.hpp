#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace lapace::data {

enum class FeatureKind { kContinuous, kCategorical };

struct MinMax {
  double min = 0.0;
  double max = 1.0;
  double span() const { return max > min ? max - min : 1.0; }
  friend bool operator==(const MinMax&, const MinMax&) = default;
};

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  std::vector<std::string> levels;  // categorical only
  std::optional<MinMax> range;      // continuous only, set once fitted
  friend bool operator==(const Feature&, const Feature&) = default;
};

// Contiguous span [begin, end) of encoded columns owned by one feature.
struct ColumnSpan {
  std::size_t feature = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// A raw row stores continuous values in original units and categorical
// values as level indices.
using RawRow = std::vector<double>;

class TabularSchema {
 public:
  TabularSchema() = default;
  TabularSchema(std::vector<Feature> features, std::string label_name, std::size_t num_classes);

  const std::vector<Feature>& features() const { return features_; }
  const std::string& label_name() const { return label_name_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_features() const { return features_.size(); }
  std::size_t num_continuous() const;
  std::size_t num_categorical() const;

  // #continuous + sum of categorical level counts.
  std::size_t encoded_width() const;
  const std::vector<ColumnSpan>& spans() const { return spans_; }
  std::vector<ColumnSpan> ohe_groups() const;
  // true for every encoded column that belongs to a one-hot group.
  std::vector<bool> categorical_columns() const;
  std::optional<std::size_t> find_feature(const std::string& name) const;
  std::size_t feature_index(const std::string& name) const;  // throws SchemaError
  std::size_t level_index(std::size_t feature, const std::string& level) const;

  bool is_fitted() const;
  // Min/max of every continuous feature over `rows`.
  void fit(std::span<const RawRow> rows);
  void set_range(std::size_t feature, MinMax range);

  // Continuous values are min-max scaled and clipped to [0, 1]; categorical
  // values become one-hot groups.
  std::vector<double> encode(std::span<const double> raw) const;
  // Inverse of encode. Categorical groups decode to their argmax level.
  RawRow decode(std::span<const double> encoded) const;
  // Continuous value in original units for one encoded column.
  double to_raw(std::size_t feature, double normalized) const;
  double to_normalized(std::size_t feature, double raw) const;

  std::string format_value(std::size_t feature, double raw) const;

  nlohmann::json to_json() const;
  static TabularSchema from_json(const nlohmann::json& j);
  static TabularSchema load(const std::string& path);
  void save(const std::string& path) const;

  friend bool operator==(const TabularSchema& a, const TabularSchema& b) {
    return a.features_ == b.features_ && a.label_name_ == b.label_name_ &&
           a.num_classes_ == b.num_classes_;
  }

 private:
  void rebuild_spans();

  std::vector<Feature> features_;
  std::string label_name_ = "label";
  std::size_t num_classes_ = 2;
  std::vector<ColumnSpan> spans_;
};

}  // namespace lapace::data
