#include "lapace/metrics/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "lapace/error.hpp"
#include "lapace/lgmvae/train.hpp"
#include "lapace/seeding.hpp"

namespace lapace::metrics {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("evaluation config: field '") + key + "' has the wrong type");
  }
}

}  // namespace

json EvaluationConfig::to_json() const {
  return json{{"repeats", repeats},
              {"test_points", test_points},
              {"source_label", source_label},
              {"target_label", target_label},
              {"grid_steps", grid_steps},
              {"lof_k", lof_k},
              {"perturbations", perturbations},
              {"radius", radius},
              {"pool_size", pool_size},
              {"pool_fraction", pool_fraction},
              {"synthetic_constraints", synthetic_constraints},
              {"constraints_per_input", constraints_per_input},
              {"correction_learning_rate", correction.learning_rate},
              {"correction_iterations", correction.max_iterations},
              {"seed", seed},
              {"record_runtime", record_runtime}};
}

EvaluationConfig EvaluationConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("evaluation config must be an object");
  EvaluationConfig c;
  const json known = c.to_json();
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("evaluation config: unknown field '" + key + "'");
  }
  read_field(j, "repeats", c.repeats);
  read_field(j, "test_points", c.test_points);
  read_field(j, "source_label", c.source_label);
  read_field(j, "target_label", c.target_label);
  read_field(j, "grid_steps", c.grid_steps);
  read_field(j, "lof_k", c.lof_k);
  read_field(j, "perturbations", c.perturbations);
  read_field(j, "radius", c.radius);
  read_field(j, "pool_size", c.pool_size);
  read_field(j, "pool_fraction", c.pool_fraction);
  read_field(j, "synthetic_constraints", c.synthetic_constraints);
  read_field(j, "constraints_per_input", c.constraints_per_input);
  read_field(j, "correction_learning_rate", c.correction.learning_rate);
  read_field(j, "correction_iterations", c.correction.max_iterations);
  read_field(j, "seed", c.seed);
  read_field(j, "record_runtime", c.record_runtime);
  if (c.repeats == 0) throw ConfigError("evaluation config: repeats must be >= 1");
  if (c.test_points == 0) throw ConfigError("evaluation config: test_points must be >= 1");
  if (c.source_label == c.target_label) {
    throw ConfigError("evaluation config: source and target labels must differ");
  }
  if (c.grid_steps < 2) throw ConfigError("evaluation config: grid_steps must be >= 2");
  if (c.pool_size == 0) throw ConfigError("evaluation config: pool_size must be >= 1");
  if (!(c.pool_fraction > 0.0 && c.pool_fraction <= 1.0)) {
    throw ConfigError("evaluation config: pool_fraction must lie in (0, 1]");
  }
  if (!(c.radius >= 0.0)) throw ConfigError("evaluation config: radius must be >= 0");
  if (c.constraints_per_input > c.synthetic_constraints) {
    throw ConfigError("evaluation config: constraints_per_input exceeds synthetic_constraints");
  }
  return c;
}

double Summary::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double Summary::stddev() const {
  if (values.size() < 2) return 0.0;
  const double m = mean();
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size() - 1));
}

json Summary::to_json() const {
  return json{{"mean", mean()}, {"std", stddev()}, {"values", values}};
}

json MetricsReport::to_json() const {
  json j;
  j["config"] = config.to_json();
  j["constraints"] = constraints.to_json();
  j["centroid_accuracy"] = centroid_accuracy;
  j["inputs_per_repeat"] = inputs_per_repeat;
  j["input_robustness_excluded"] = robustness_excluded;
  j["tstr"] = {{"accuracy_real", tstr_real.to_json()},
               {"accuracy_synthetic", tstr_synthetic.to_json()}};
  j["actionability_paths"] = {{"constrained", actionability_constrained.to_json()},
                              {"naive", actionability_naive.to_json()}};
  for (const auto v : kVariants) {
    const VariantReport& r = variant(v);
    json m{{"validity", r.validity.to_json()},
           {"proximity", r.proximity.to_json()},
           {"plausibility", r.plausibility.to_json()},
           {"diversity", r.diversity.to_json()},
           {"model_robustness", r.model_robustness.to_json()},
           {"input_robustness", r.input_robustness.to_json()},
           {"actionability", r.actionability.to_json()}};
    if (config.record_runtime) m["runtime_seconds"] = r.runtime_seconds.to_json();
    j["variants"][recourse::to_string(v)] = m;
  }
  return j;
}

json MetricsReport::timing_json() const {
  json j = json::object();
  for (const auto v : kVariants) {
    j[recourse::to_string(v)] = variant(v).runtime_seconds.to_json();
  }
  return j;
}

recourse::ConstraintSpec synthetic_constraints(const data::Dataset& data, int target,
                                               std::size_t count, std::uint64_t seed) {
  const auto& labels = data.predicted();
  const auto& schema = data.schema;
  std::vector<data::RawRow> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (labels[i] == target) rows.push_back(schema.decode(data.row(i)));
  }
  if (rows.empty()) throw ValidationError("synthetic constraints: no rows of the target class");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> tail(0.02, 0.10);
  auto quantile = [&](std::size_t f, double q) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r[f]);
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };

  std::vector<std::size_t> continuous;
  for (std::size_t f = 0; f < schema.num_features(); ++f) {
    if (schema.features()[f].kind == data::FeatureKind::kContinuous) continuous.push_back(f);
  }
  std::vector<recourse::ConstraintTerm> candidates;
  for (std::size_t f : continuous) {
    const auto& name = schema.features()[f].name;
    candidates.push_back(recourse::BoxConstraint{name, quantile(f, tail(rng)), std::nullopt});
    candidates.push_back(recourse::BoxConstraint{name, std::nullopt, quantile(f, 1.0 - tail(rng))});
  }
  for (std::size_t a : continuous) {
    for (std::size_t b : continuous) {
      if (a == b) continue;
      const auto holds = std::count_if(rows.begin(), rows.end(),
                                       [&](const data::RawRow& r) { return r[a] >= r[b]; });
      if (2 * static_cast<std::size_t>(holds) >= rows.size()) {
        candidates.push_back(recourse::GreaterConstraint{schema.features()[a].name,
                                                         schema.features()[b].name});
      }
    }
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  if (candidates.size() > count) candidates.resize(count);
  return {candidates};
}

namespace {

using recourse::CESelection;
using recourse::LatentPath;
using recourse::Variant;

std::array<CeSet, 3> selection_sets(const std::vector<CESelection>& selections) {
  std::array<CeSet, 3> sets;
  for (const auto& s : selections) {
    for (std::size_t v = 0; v < 3; ++v) sets[v].push_back(recourse::pick(s, kVariants[v]).decoded);
  }
  return sets;
}

}  // namespace

MetricsReport evaluate(const EvaluationInputs& in, const EvaluationConfig& config) {
  const auto& model = in.model;
  const auto& clf = in.classifier;
  const int target = config.target_label;
  if (!model.recourse_ready) throw ValidationError("evaluate: model is not recourse-ready");
  if (!(in.train.schema == model.schema) || !(in.test.schema == model.schema)) {
    throw SchemaError("evaluate: dataset schema differs from the model schema");
  }

  MetricsReport report;
  report.config = config;
  report.centroid_accuracy = lgmvae::centroid_accuracy(model, clf);

  const recourse::TauGrid grid = recourse::TauGrid::uniform(config.grid_steps);
  const LofIndex lof(in.train.X, config.lof_k);
  const auto pool = classifiers::build_retrain_pool(in.train, in.trainer, config.pool_size,
                                                    config.pool_fraction,
                                                    derive_seed(config.seed, 1));
  const bool user_constraints = in.constraints.has_value();
  report.constraints = user_constraints
                           ? *in.constraints
                           : synthetic_constraints(in.train, target, config.synthetic_constraints,
                                                   derive_seed(config.seed, 2));

  std::vector<std::size_t> candidates;
  const auto& test_labels = in.test.predicted();
  for (std::size_t i = 0; i < in.test.size(); ++i) {
    if (test_labels[i] == config.source_label) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw ValidationError("evaluate: no test row is predicted as label " +
                          std::to_string(config.source_label));
  }

  for (std::size_t rep = 0; rep < config.repeats; ++rep) {
    const std::uint64_t rep_seed = derive_seed(config.seed, 100 + rep);
    std::vector<std::size_t> chosen = candidates;
    std::mt19937_64 rng(rep_seed);
    std::shuffle(chosen.begin(), chosen.end(), rng);
    if (chosen.size() > config.test_points) chosen.resize(config.test_points);
    report.inputs_per_repeat.push_back(chosen.size());

    std::vector<Point> inputs;
    std::array<std::vector<CeSet>, 3> ces;
    std::array<double, 3> robustness{};
    std::array<std::size_t, 3> actionable{};
    std::size_t robustness_used = 0;
    double seconds = 0.0;
    std::vector<std::vector<LatentPath>> constrained, naive;

    for (std::size_t k = 0; k < chosen.size(); ++k) {
      const auto xs = in.test.row(chosen[k]);
      const Point x(xs.begin(), xs.end());
      const std::uint64_t point_seed = derive_seed(rep_seed, k);

      const auto t0 = std::chrono::steady_clock::now();
      const auto paths = recourse::generate_paths(model, clf, x, target, grid);
      const auto sets = selection_sets(recourse::select_all(model, clf, paths, target));
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      inputs.push_back(x);
      for (std::size_t v = 0; v < 3; ++v) ces[v].push_back(sets[v]);

      const int own = clf.predict(x);
      for (const auto& p : perturb(x, model.schema, config.perturbations, config.radius,
                                   derive_seed(point_seed, 1))) {
        if (clf.predict(p) != own) {
          ++report.robustness_excluded;
          continue;
        }
        const auto moved = selection_sets(recourse::select_all(
            model, clf, recourse::generate_paths(model, clf, p, target, grid), target));
        for (std::size_t v = 0; v < 3; ++v) robustness[v] += set_distance(sets[v], moved[v]);
        ++robustness_used;
      }

      recourse::ConstraintSpec spec = report.constraints;
      if (!user_constraints && spec.terms.size() > config.constraints_per_input) {
        std::mt19937_64 pick_rng(derive_seed(point_seed, 2));
        std::shuffle(spec.terms.begin(), spec.terms.end(), pick_rng);
        spec.terms.resize(config.constraints_per_input);
      }
      const recourse::ConstraintSet cs(spec, model.schema);
      for (std::size_t v = 0; v < 3; ++v) {
        actionable[v] += std::any_of(sets[v].begin(), sets[v].end(), [&](const Point& ce) {
          return clf.predict(ce) == target && cs.satisfied(ce);
        });
      }
      constrained.push_back(recourse::generate_constrained_paths(model, clf, x, target, grid, cs,
                                                                 config.correction));
      naive.push_back(recourse::generate_naive_paths(model, clf, x, target, grid, cs));
    }

    const double n = static_cast<double>(chosen.size());
    for (std::size_t v = 0; v < 3; ++v) {
      VariantReport& r = report.variants[v];
      r.validity.values.push_back(validity(ces[v], clf, target));
      r.proximity.values.push_back(proximity_l1(inputs, ces[v]));
      r.plausibility.values.push_back(plausibility(lof, ces[v]));
      r.diversity.values.push_back(mean_diversity(ces[v]));
      r.model_robustness.values.push_back(model_robustness(ces[v], pool, target));
      r.input_robustness.values.push_back(
          robustness_used == 0 ? 0.0 : robustness[v] / static_cast<double>(robustness_used));
      r.actionability.values.push_back(static_cast<double>(actionable[v]) / n);
      r.runtime_seconds.values.push_back(seconds / n);
    }
    report.actionability_constrained.values.push_back(actionability_rate(constrained, target));
    report.actionability_naive.values.push_back(actionability_rate(naive, target));

    const auto tstr = tstr_utility(model, in.train, in.test, in.trainer, derive_seed(rep_seed, 3));
    report.tstr_real.values.push_back(tstr.accuracy_real);
    report.tstr_synthetic.values.push_back(tstr.accuracy_synthetic);
  }
  return report;
}

}  // namespace lapace::metrics
