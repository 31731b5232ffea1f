#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lapace/data/schema.hpp"
#include "lapace/recourse/lapace.hpp"

namespace lapace::io {

// Encoded row -> {"name": raw value}; categorical values become level names.
nlohmann::json features_to_json(const data::TabularSchema& schema, std::span<const double> encoded);

// Accepts an array in schema order or an object keyed by feature name.
// Continuous values must be numbers, categorical values level names.
// Errors are SchemaErrors whose message starts with the offending field.
std::vector<double> features_from_json(const data::TabularSchema& schema, const nlohmann::json& j);

nlohmann::json entry_to_json(const data::TabularSchema& schema, const recourse::PathEntry& e);

}  // namespace lapace::io
