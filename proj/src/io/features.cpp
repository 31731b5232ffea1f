#include "lapace/io/features.hpp"

#include <cmath>

#include "lapace/error.hpp"

namespace lapace::io {

using nlohmann::json;

json features_to_json(const data::TabularSchema& schema, std::span<const double> encoded) {
  const data::RawRow raw = schema.decode(encoded);
  json out = json::object();
  for (std::size_t f = 0; f < schema.num_features(); ++f) {
    const auto& feat = schema.features()[f];
    if (feat.kind == data::FeatureKind::kContinuous) {
      out[feat.name] = raw[f];
    } else {
      out[feat.name] = feat.levels.at(static_cast<std::size_t>(raw[f]));
    }
  }
  return out;
}

std::vector<double> features_from_json(const data::TabularSchema& schema, const json& j) {
  const std::size_t n = schema.num_features();
  std::vector<const json*> values(n, nullptr);
  if (j.is_array()) {
    if (j.size() != n) {
      throw SchemaError("features: expected " + std::to_string(n) + " values, got " +
                        std::to_string(j.size()));
    }
    for (std::size_t f = 0; f < n; ++f) values[f] = &j[f];
  } else if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      const auto f = schema.find_feature(key);
      if (!f) throw SchemaError("features." + key + ": unknown feature");
      values[*f] = &value;
    }
    for (std::size_t f = 0; f < n; ++f) {
      if (!values[f]) throw SchemaError("features." + schema.features()[f].name + ": missing");
    }
  } else {
    throw SchemaError("features: expected an array or an object");
  }

  data::RawRow raw(n);
  for (std::size_t f = 0; f < n; ++f) {
    const auto& feat = schema.features()[f];
    const json& v = *values[f];
    const std::string field = "features." + feat.name;
    if (feat.kind == data::FeatureKind::kContinuous) {
      if (!v.is_number()) throw SchemaError(field + ": expected a number");
      raw[f] = v.get<double>();
      if (!std::isfinite(raw[f])) throw SchemaError(field + ": not finite");
    } else {
      if (!v.is_string()) throw SchemaError(field + ": expected one of the level names");
      try {
        raw[f] = static_cast<double>(schema.level_index(f, v.get<std::string>()));
      } catch (const SchemaError&) {
        throw SchemaError(field + ": unknown level '" + v.get<std::string>() + "'");
      }
    }
  }
  return schema.encode(raw);
}

json entry_to_json(const data::TabularSchema& schema, const recourse::PathEntry& e) {
  return json{{"tau", e.tau},
              {"features", features_to_json(schema, e.decoded)},
              {"label", e.label},
              {"corrections", e.corrections},
              {"satisfied", e.satisfied}};
}

}  // namespace lapace::io
