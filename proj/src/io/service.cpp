#include "lapace/io/service.hpp"

#include "httplib.h"
#include "lapace/error.hpp"
#include "lapace/io/features.hpp"
#include "lapace/recourse/constraints.hpp"
#include "lapace/recourse/lapace.hpp"

namespace lapace::io {

using nlohmann::json;

namespace {

// A request problem mapped to an HTTP status.
struct RequestError {
  int status;
  std::string message;
  std::string field;
};

HttpResponse error_response(int status, const std::string& message, const std::string& field = "") {
  json body{{"error", message}};
  if (!field.empty()) body["field"] = field;
  return {status, body};
}

RequestError bad_request(const std::string& message) {
  // Messages of schema errors start with "field: ...".
  const auto colon = message.find(": ");
  std::string field;
  if (colon != std::string::npos && message.find(' ') >= colon) field = message.substr(0, colon);
  return {400, message, field};
}

json parse_body(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw RequestError{400, "request body is not valid JSON", "body"};
  }
  if (!j.is_object()) throw RequestError{400, "request body must be a JSON object", "body"};
  return j;
}

std::vector<double> parse_input(const data::TabularSchema& schema, const json& body) {
  if (!body.contains("features")) throw RequestError{400, "features: missing", "features"};
  try {
    return features_from_json(schema, body.at("features"));
  } catch (const SchemaError& e) {
    throw bad_request(e.what());
  }
}

int parse_label(const json& value, const std::string& field, std::size_t num_labels) {
  if (!value.is_number_integer()) throw RequestError{400, field + ": expected an integer", field};
  const auto v = value.get<long long>();
  if (v < 0 || v >= static_cast<long long>(num_labels)) {
    throw RequestError{400, field + ": label must lie in [0, " + std::to_string(num_labels) + ")",
                       field};
  }
  return static_cast<int>(v);
}

std::size_t parse_grid(const json& body) {
  if (!body.contains("grid")) return 21;
  const json& g = body.at("grid");
  if (!g.is_number_integer() || g.get<long long>() < 2 ||
      g.get<long long>() > static_cast<long long>(kMaxGridSteps)) {
    throw RequestError{400, "grid: expected an integer step count in [2, " +
                                std::to_string(kMaxGridSteps) + "]",
                       "grid"};
  }
  return g.get<std::size_t>();
}

json paths_json(const lgmvae::LgmvaeModel& model, const classifiers::Classifier& clf,
                const std::vector<recourse::LatentPath>& paths, int target) {
  json out = json::array();
  for (const auto& p : paths) {
    json entries = json::array();
    for (const auto& e : p.entries) entries.push_back(entry_to_json(model.schema, e));
    json selection = nullptr;
    const bool any_valid = std::any_of(p.entries.begin(), p.entries.end(),
                                       [&](const auto& e) { return e.label == target; });
    if (any_valid) {
      const auto s = recourse::select_points(model, clf, p, target);
      selection = {{"first", entry_to_json(model.schema, s.first)},
                   {"middle", entry_to_json(model.schema, s.middle)},
                   {"last", entry_to_json(model.schema, s.last)}};
    }
    out.push_back({{"cluster", p.cluster},
                   {"flagged", p.flagged},
                   {"entries", entries},
                   {"selection", selection}});
  }
  return out;
}

}  // namespace

void RecourseService::load(std::shared_ptr<const lgmvae::LgmvaeModel> model,
                           std::shared_ptr<const classifiers::Classifier> classifier) {
  if (!model || !classifier) throw ValidationError("service: model and classifier are required");
  if (!model->recourse_ready) throw ValidationError("service: model is not recourse-ready");
  if (classifier->input_width() != model->input_width() ||
      classifier->num_classes() != model->num_labels()) {
    throw SchemaError("service: classifier and model disagree on the schema");
  }
  auto next = std::make_shared<const Artifacts>(Artifacts{std::move(model), std::move(classifier)});
  std::lock_guard lock(mutex_);
  artifacts_ = std::move(next);
}

bool RecourseService::ready() const { return snapshot() != nullptr; }

std::shared_ptr<const RecourseService::Artifacts> RecourseService::snapshot() const {
  std::lock_guard lock(mutex_);
  return artifacts_;
}

HttpResponse RecourseService::handle(const std::string& method, const std::string& path,
                                     const QueryParams& params, const std::string& body) const {
  static const std::map<std::string, std::string> routes{
      {"/health", "GET"},   {"/schema", "GET"},   {"/centroids", "GET"},
      {"/encode", "POST"},  {"/paths", "POST"},   {"/constrained-paths", "POST"},
      {"/classify", "POST"}};
  const auto route = routes.find(path);
  if (route == routes.end()) return error_response(404, "no such endpoint: " + path);
  if (route->second != method) return error_response(405, path + " only accepts " + route->second);

  const auto artifacts = snapshot();
  if (!artifacts) return error_response(503, "artifacts are not loaded yet");
  const auto& model = *artifacts->model;
  const auto& clf = *artifacts->classifier;
  const auto& schema = model.schema;

  try {
    if (path == "/health") return {200, {{"status", "ok"}}};
    if (path == "/schema") return {200, schema.to_json()};
    if (path == "/centroids") {
      const auto it = params.find("label");
      if (it == params.end()) throw RequestError{400, "label: query parameter is required", "label"};
      json label;
      try {
        label = json::parse(it->second);
      } catch (const json::exception&) {
        throw RequestError{400, "label: expected an integer", "label"};
      }
      const int y = parse_label(label, "label", model.num_labels());
      json list = json::array();
      for (const auto& c : lgmvae::centroids(model, y)) {
        list.push_back({{"cluster", c.cluster},
                        {"features", features_to_json(schema, c.decoded)},
                        {"label", clf.predict(c.decoded)}});
      }
      return {200, {{"label", y}, {"centroids", list}}};
    }

    const json request = parse_body(body);
    const std::vector<double> x = parse_input(schema, request);
    const int current = clf.predict(x);
    if (path == "/classify") {
      return {200, {{"label", current}, {"probabilities", clf.predict_proba(x)}}};
    }
    if (path == "/encode") {
      return {200, {{"label", current}, {"latent", recourse::encode_input(model, x, current)}}};
    }

    if (!request.contains("target")) throw RequestError{400, "target: missing", "target"};
    const int target = parse_label(request.at("target"), "target", model.num_labels());
    const recourse::TauGrid grid = recourse::TauGrid::uniform(parse_grid(request));
    if (target == current) {
      throw RequestError{422, "input is already classified as target " + std::to_string(target),
                         "target"};
    }
    json response{{"target", target},
                  {"grid", grid.size()},
                  {"input", {{"features", features_to_json(schema, x)}, {"label", current}}}};
    if (path == "/paths") {
      response["paths"] =
          paths_json(model, clf, recourse::generate_paths(model, clf, x, target, grid), target);
      return {200, response};
    }

    // /constrained-paths
    if (!request.contains("constraints")) {
      throw RequestError{400, "constraints: missing", "constraints"};
    }
    recourse::ConstraintSpec spec;
    std::optional<recourse::ConstraintSet> set;
    try {
      spec = recourse::ConstraintSpec::from_json(request.at("constraints"));
      set.emplace(spec, schema);
    } catch (const SchemaError& e) {
      throw RequestError{400, std::string("constraints: ") + e.what(), "constraints"};
    }
    if (!set->feasible()) {
      throw RequestError{422, "constraints: some box has min > max, no point can satisfy them",
                         "constraints"};
    }
    response["constraints"] = spec.to_json();
    response["paths"] = paths_json(
        model, clf, recourse::generate_constrained_paths(model, clf, x, target, grid, *set), target);
    return {200, response};
  } catch (const RequestError& e) {
    return error_response(e.status, e.message, e.field);
  } catch (const SchemaError& e) {
    const auto r = bad_request(e.what());
    return error_response(r.status, r.message, r.field);
  } catch (const NumericError& e) {
    return error_response(422, e.what());
  } catch (const ValidationError& e) {
    return error_response(422, e.what());
  }
}

void RecourseService::mount(httplib::Server& server) const {
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams params(req.params.begin(), req.params.end());
    HttpResponse r;
    try {
      r = handle(req.method, req.path, params, req.body);
    } catch (const std::exception& e) {
      r = error_response(500, e.what());
    }
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  for (const char* path : {"/health", "/schema", "/centroids", "/encode", "/paths",
                           "/constrained-paths", "/classify"}) {
    server.Get(path, dispatch);
    server.Post(path, dispatch);
  }
}

}  // namespace lapace::io
