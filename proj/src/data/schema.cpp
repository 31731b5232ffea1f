#include "lapace/data/schema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "lapace/error.hpp"

namespace lapace::data {

TabularSchema::TabularSchema(std::vector<Feature> features, std::string label_name,
                             std::size_t num_classes)
    : features_(std::move(features)),
      label_name_(std::move(label_name)),
      num_classes_(num_classes) {
  if (features_.empty()) throw SchemaError("schema has no features");
  if (num_classes_ < 1) throw SchemaError("schema needs at least one class");
  std::unordered_set<std::string> seen;
  for (const auto& f : features_) {
    if (f.name.empty()) throw SchemaError("feature with empty name");
    if (!seen.insert(f.name).second) throw SchemaError("duplicate feature '" + f.name + "'");
    if (f.name == label_name_) {
      throw SchemaError("feature '" + f.name + "' collides with the label column");
    }
    if (f.kind == FeatureKind::kCategorical && f.levels.empty()) {
      throw SchemaError("categorical feature '" + f.name + "' has no levels");
    }
  }
  rebuild_spans();
}

void TabularSchema::rebuild_spans() {
  spans_.clear();
  std::size_t col = 0;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const std::size_t width =
        features_[i].kind == FeatureKind::kContinuous ? 1 : features_[i].levels.size();
    spans_.push_back({i, col, col + width});
    col += width;
  }
}

std::size_t TabularSchema::num_continuous() const {
  return static_cast<std::size_t>(std::count_if(features_.begin(), features_.end(), [](const Feature& f) {
    return f.kind == FeatureKind::kContinuous;
  }));
}

std::size_t TabularSchema::num_categorical() const {
  return features_.size() - num_continuous();
}

std::size_t TabularSchema::encoded_width() const {
  return spans_.empty() ? 0 : spans_.back().end;
}

std::vector<ColumnSpan> TabularSchema::ohe_groups() const {
  std::vector<ColumnSpan> out;
  for (const auto& s : spans_) {
    if (features_[s.feature].kind == FeatureKind::kCategorical) out.push_back(s);
  }
  return out;
}

std::vector<bool> TabularSchema::categorical_columns() const {
  std::vector<bool> out(encoded_width(), false);
  for (const auto& s : ohe_groups()) {
    for (std::size_t c = s.begin; c < s.end; ++c) out[c] = true;
  }
  return out;
}

std::optional<std::size_t> TabularSchema::find_feature(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t TabularSchema::feature_index(const std::string& name) const {
  if (auto idx = find_feature(name)) return *idx;
  throw SchemaError("unknown feature '" + name + "'");
}

std::size_t TabularSchema::level_index(std::size_t feature, const std::string& level) const {
  const auto& levels = features_.at(feature).levels;
  const auto it = std::find(levels.begin(), levels.end(), level);
  if (it == levels.end()) {
    throw SchemaError("unseen level '" + level + "' for categorical feature '" +
                      features_[feature].name + "'");
  }
  return static_cast<std::size_t>(it - levels.begin());
}

bool TabularSchema::is_fitted() const {
  return std::all_of(features_.begin(), features_.end(), [](const Feature& f) {
    return f.kind == FeatureKind::kCategorical || f.range.has_value();
  });
}

void TabularSchema::fit(std::span<const RawRow> rows) {
  if (rows.empty()) throw SchemaError("cannot fit normalization on zero rows");
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].kind != FeatureKind::kContinuous) continue;
    MinMax r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& row : rows) {
      r.min = std::min(r.min, row.at(i));
      r.max = std::max(r.max, row.at(i));
    }
    features_[i].range = r;
  }
}

void TabularSchema::set_range(std::size_t feature, MinMax range) {
  if (features_.at(feature).kind != FeatureKind::kContinuous) {
    throw SchemaError("range on categorical feature '" + features_[feature].name + "'");
  }
  features_[feature].range = range;
}

double TabularSchema::to_normalized(std::size_t feature, double raw) const {
  const auto& f = features_.at(feature);
  if (!f.range) throw SchemaError("feature '" + f.name + "' has no normalization range");
  return (raw - f.range->min) / f.range->span();
}

double TabularSchema::to_raw(std::size_t feature, double normalized) const {
  const auto& f = features_.at(feature);
  if (!f.range) throw SchemaError("feature '" + f.name + "' has no normalization range");
  return f.range->min + normalized * f.range->span();
}

std::vector<double> TabularSchema::encode(std::span<const double> raw) const {
  if (raw.size() != features_.size()) {
    throw SchemaError("row has " + std::to_string(raw.size()) + " values, schema has " +
                      std::to_string(features_.size()) + " features");
  }
  std::vector<double> out(encoded_width(), 0.0);
  for (const auto& s : spans_) {
    const auto& f = features_[s.feature];
    const double v = raw[s.feature];
    if (f.kind == FeatureKind::kContinuous) {
      if (!std::isfinite(v)) throw SchemaError("non-finite value for '" + f.name + "'");
      out[s.begin] = std::clamp(to_normalized(s.feature, v), 0.0, 1.0);
    } else {
      const double rounded = std::round(v);
      if (rounded != v || v < 0 || v >= static_cast<double>(f.levels.size())) {
        throw SchemaError("bad level index for '" + f.name + "'");
      }
      out[s.begin + static_cast<std::size_t>(v)] = 1.0;
    }
  }
  return out;
}

RawRow TabularSchema::decode(std::span<const double> encoded) const {
  if (encoded.size() != encoded_width()) {
    throw SchemaError("encoded row has width " + std::to_string(encoded.size()) +
                      ", schema expects " + std::to_string(encoded_width()));
  }
  RawRow out(features_.size(), 0.0);
  for (const auto& s : spans_) {
    if (features_[s.feature].kind == FeatureKind::kContinuous) {
      out[s.feature] = to_raw(s.feature, encoded[s.begin]);
    } else {
      std::size_t best = s.begin;
      for (std::size_t c = s.begin + 1; c < s.end; ++c) {
        if (encoded[c] > encoded[best]) best = c;
      }
      out[s.feature] = static_cast<double>(best - s.begin);
    }
  }
  return out;
}

std::string TabularSchema::format_value(std::size_t feature, double raw) const {
  const auto& f = features_.at(feature);
  if (f.kind == FeatureKind::kCategorical) return f.levels.at(static_cast<std::size_t>(raw));
  std::ostringstream out;
  out.precision(17);
  out << raw;
  return out.str();
}

nlohmann::json TabularSchema::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features_) {
    nlohmann::json j;
    j["name"] = f.name;
    if (f.kind == FeatureKind::kContinuous) {
      j["kind"] = "continuous";
      if (f.range) {
        j["min"] = f.range->min;
        j["max"] = f.range->max;
      }
    } else {
      j["kind"] = "categorical";
      j["levels"] = f.levels;
    }
    feats.push_back(std::move(j));
  }
  return {{"features", feats},
          {"label", {{"name", label_name_}, {"classes", num_classes_}}}};
}

TabularSchema TabularSchema::from_json(const nlohmann::json& j) {
  try {
    std::vector<Feature> features;
    for (const auto& jf : j.at("features")) {
      Feature f;
      f.name = jf.at("name").get<std::string>();
      const auto kind = jf.at("kind").get<std::string>();
      if (kind == "continuous") {
        f.kind = FeatureKind::kContinuous;
        if (jf.contains("min") != jf.contains("max")) {
          throw SchemaError("feature '" + f.name + "' must give both min and max");
        }
        if (jf.contains("min")) f.range = MinMax{jf["min"].get<double>(), jf["max"].get<double>()};
      } else if (kind == "categorical") {
        f.kind = FeatureKind::kCategorical;
        f.levels = jf.at("levels").get<std::vector<std::string>>();
      } else {
        throw SchemaError("feature '" + f.name + "' has unknown kind '" + kind + "'");
      }
      features.push_back(std::move(f));
    }
    const auto& label = j.at("label");
    return TabularSchema(std::move(features), label.value("name", std::string("label")),
                         label.at("classes").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

TabularSchema TabularSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void TabularSchema::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write schema file '" + path + "'");
  out << to_json().dump(2) << '\n';
}

}  // namespace lapace::data
