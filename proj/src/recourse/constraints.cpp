#include "lapace/recourse/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lapace/error.hpp"

namespace lapace::recourse {

namespace {

using nlohmann::json;

std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number()) throw SchemaError(std::string("constraint field '") + key + "' must be a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw SchemaError(std::string("constraint field '") + key + "' is not finite");
  return v;
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw SchemaError(std::string("constraint field '") + key + "' must be a string");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

json term_to_json(const ConstraintTerm& term) {
  if (const auto* box = std::get_if<BoxConstraint>(&term)) {
    json j{{"feature", box->feature}};
    if (box->min) j["min"] = *box->min;
    if (box->max) j["max"] = *box->max;
    return j;
  }
  const auto& g = std::get<GreaterConstraint>(term);
  return json{{"feature_a", g.feature_a}, {"feature_b", g.feature_b}, {"relation", "greater"}};
}

ConstraintTerm term_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("constraint term must be an object");
  if (j.contains("feature_a") || j.contains("feature_b") || j.contains("relation")) {
    GreaterConstraint g{required_string(j, "feature_a"), required_string(j, "feature_b")};
    if (required_string(j, "relation") != "greater") {
      throw SchemaError("constraint relation must be \"greater\"");
    }
    return g;
  }
  BoxConstraint box{required_string(j, "feature"), optional_number(j, "min"),
                    optional_number(j, "max")};
  if (!box.min && !box.max) {
    throw SchemaError("box constraint on '" + box.feature + "' needs min or max");
  }
  return box;
}

json ConstraintSpec::to_json() const {
  json terms_json = json::array();
  for (const auto& t : terms) terms_json.push_back(term_to_json(t));
  return json{{"terms", terms_json}};
}

ConstraintSpec ConstraintSpec::from_json(const json& j) {
  const json* list = &j;
  if (j.is_object()) {
    if (!j.contains("terms")) throw SchemaError("constraint document needs a 'terms' array");
    list = &j.at("terms");
  }
  if (!list->is_array()) throw SchemaError("constraint terms must be an array");
  ConstraintSpec spec;
  for (const auto& t : *list) spec.terms.push_back(term_from_json(t));
  return spec;
}

ConstraintSpec ConstraintSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open constraint file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("constraint file '" + path + "': " + e.what());
  }
  return from_json(j);
}

double AffineTerm::evaluate(std::span<const double> x) const {
  double g = offset;
  for (std::size_t k = 0; k < columns.size(); ++k) g += coefficients[k] * x[columns[k]];
  return g;
}

ConstraintSet::ConstraintSet(const ConstraintSpec& spec, const data::TabularSchema& schema)
    : spec_(spec), schema_(schema) {
  auto continuous = [&](const std::string& name) {
    const std::size_t f = schema.feature_index(name);
    const auto& feat = schema.features()[f];
    if (feat.kind != data::FeatureKind::kContinuous) {
      throw SchemaError("constraint on '" + name + "': only continuous features can be constrained");
    }
    if (!feat.range) throw SchemaError("constraint on '" + name + "': feature range is not fitted");
    return f;
  };
  for (const auto& term : spec.terms) {
    if (const auto* box = std::get_if<BoxConstraint>(&term)) {
      const std::size_t f = continuous(box->feature);
      const std::size_t col = schema.spans()[f].begin;
      BoxBounds b{col, std::nullopt, std::nullopt};
      if (box->min) {
        b.min = schema.to_normalized(f, *box->min);
        terms_.push_back({{col}, {-1.0}, *b.min});
      }
      if (box->max) {
        b.max = schema.to_normalized(f, *box->max);
        terms_.push_back({{col}, {1.0}, -*b.max});
      }
      boxes_.push_back(b);
    } else {
      const auto& g = std::get<GreaterConstraint>(term);
      const std::size_t fa = continuous(g.feature_a);
      const std::size_t fb = continuous(g.feature_b);
      if (fa == fb) throw SchemaError("pairwise constraint compares '" + g.feature_a + "' with itself");
      const auto ra = *schema.features()[fa].range;
      const auto rb = *schema.features()[fb].range;
      const double scale = std::max(ra.span(), rb.span());
      const std::size_t ca = schema.spans()[fa].begin;
      const std::size_t cb = schema.spans()[fb].begin;
      // g = (raw_b - raw_a) / scale
      terms_.push_back({{cb, ca}, {rb.span() / scale, -ra.span() / scale}, (rb.min - ra.min) / scale});
      pairs_.push_back({fa, fb, ca, cb});
    }
  }
}

bool ConstraintSet::feasible() const {
  return std::none_of(boxes_.begin(), boxes_.end(),
                      [](const BoxBounds& b) { return b.min && b.max && *b.min > *b.max; });
}

double ConstraintSet::penalty(std::span<const double> x) const {
  double g = 0.0;
  for (const auto& t : terms_) g += std::max(0.0, t.evaluate(x));
  return g;
}

Var ConstraintSet::penalty(Var x) const {
  diffmath::Tape& tape = x.tape();
  const std::size_t n = x.value().rows();
  Var total = tape.constant(Tensor::zeros(n, 1));
  for (const auto& t : terms_) {
    Tensor coef = Tensor::zeros(t.columns.size(), 1);
    for (std::size_t k = 0; k < t.columns.size(); ++k) coef[k] = t.coefficients[k];
    Var g = diffmath::add_scalar(
        diffmath::matmul(diffmath::select_cols(x, t.columns), tape.constant(std::move(coef))),
        t.offset);
    total = diffmath::add(total, diffmath::hinge(g));
  }
  return total;
}

std::vector<double> ConstraintSet::clamp(std::span<const double> x) const {
  std::vector<double> out(x.begin(), x.end());
  for (const auto& p : pairs_) {
    const double raw_a = schema_.to_raw(p.feature_a, out[p.column_a]);
    const double raw_b = schema_.to_raw(p.feature_b, out[p.column_b]);
    if (raw_a < raw_b) out[p.column_a] = schema_.to_normalized(p.feature_a, raw_b);
  }
  for (const auto& b : boxes_) {
    if (b.min) out[b.column] = std::max(out[b.column], *b.min);
    if (b.max) out[b.column] = std::min(out[b.column], *b.max);
  }
  return out;
}

}  // namespace lapace::recourse
