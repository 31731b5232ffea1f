#include "lapace/io/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "lapace/error.hpp"
#include "lapace/seeding.hpp"

namespace lapace::io {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

void require_positive(std::size_t v, const char* name, const std::string& where) {
  if (v == 0) throw ConfigError(where + ": " + name + " must be positive");
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

json to_json(const classifiers::ClassifierSpec& s) {
  return json{{"kind", classifiers::to_string(s.kind)},
              {"hidden", s.mlp.hidden},
              {"epochs", s.mlp.epochs},
              {"batch_size", s.mlp.batch_size},
              {"learning_rate", s.mlp.learning_rate},
              {"n_trees", s.forest.n_trees},
              {"max_depth", s.forest.max_depth},
              {"min_samples_split", s.forest.min_samples_split},
              {"bootstrap", s.forest.bootstrap},
              {"seed", s.kind == classifiers::ClassifierKind::kMlp ? s.mlp.seed : s.forest.seed}};
}

classifiers::ClassifierSpec classifier_spec_from_json(const json& j) {
  const std::string where = "classifier config";
  reject_unknown(j, {"kind", "hidden", "epochs", "batch_size", "learning_rate", "n_trees",
                     "max_depth", "min_samples_split", "bootstrap", "seed"},
                 where);
  classifiers::ClassifierSpec s;
  std::string kind = classifiers::to_string(s.kind);
  read(j, "kind", kind, where);
  try {
    s.kind = classifiers::classifier_kind_from_string(kind);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  read(j, "hidden", s.mlp.hidden, where);
  read(j, "epochs", s.mlp.epochs, where);
  read(j, "batch_size", s.mlp.batch_size, where);
  read(j, "learning_rate", s.mlp.learning_rate, where);
  read(j, "n_trees", s.forest.n_trees, where);
  read(j, "max_depth", s.forest.max_depth, where);
  read(j, "min_samples_split", s.forest.min_samples_split, where);
  read(j, "bootstrap", s.forest.bootstrap, where);
  std::uint64_t seed = 0;
  read(j, "seed", seed, where);
  s.mlp.seed = s.forest.seed = seed;
  require_positive(s.mlp.batch_size, "batch_size", where);
  require_positive(s.forest.n_trees, "n_trees", where);
  require_positive(s.forest.max_depth, "max_depth", where);
  if (!(s.mlp.learning_rate > 0.0)) throw ConfigError(where + ": learning_rate must be positive");
  for (std::size_t h : s.mlp.hidden) require_positive(h, "hidden width", where);
  return s;
}

json to_json(const lgmvae::LgmvaeConfig& c) {
  return json{{"latent_dim", c.latent_dim},
              {"clusters_per_class", c.clusters_per_class},
              {"hidden", c.hidden},
              {"loss_weights", {c.weights.kl_c, c.weights.kl_z, c.weights.recon}},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"validation_fraction", c.validation_fraction},
              {"seed", c.seed}};
}

lgmvae::LgmvaeConfig lgmvae_config_from_json(const json& j) {
  const std::string where = "lgmvae config";
  reject_unknown(j, {"latent_dim", "clusters_per_class", "hidden", "loss_weights", "batch_size",
                     "learning_rate", "max_epochs", "patience", "validation_fraction", "seed"},
                 where);
  lgmvae::LgmvaeConfig c;
  read(j, "latent_dim", c.latent_dim, where);
  read(j, "clusters_per_class", c.clusters_per_class, where);
  read(j, "hidden", c.hidden, where);
  if (j.contains("loss_weights")) {
    std::vector<double> w;
    read(j, "loss_weights", w, where);
    if (w.size() != 3) throw ConfigError(where + ": loss_weights needs [kl_c, kl_z, recon]");
    for (double v : w) {
      if (!(v >= 0.0)) throw ConfigError(where + ": loss weights must be >= 0");
    }
    c.weights = {w[0], w[1], w[2]};
  }
  read(j, "batch_size", c.batch_size, where);
  read(j, "learning_rate", c.learning_rate, where);
  read(j, "max_epochs", c.max_epochs, where);
  read(j, "patience", c.patience, where);
  read(j, "validation_fraction", c.validation_fraction, where);
  read(j, "seed", c.seed, where);
  require_positive(c.latent_dim, "latent_dim", where);
  require_positive(c.clusters_per_class, "clusters_per_class", where);
  require_positive(c.batch_size, "batch_size", where);
  require_positive(c.patience, "patience", where);
  if (c.hidden.empty()) throw ConfigError(where + ": hidden needs at least one layer");
  for (std::size_t h : c.hidden) require_positive(h, "hidden width", where);
  if (!(c.learning_rate > 0.0)) throw ConfigError(where + ": learning_rate must be positive");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
    throw ConfigError(where + ": validation_fraction must lie in (0, 1)");
  }
  return c;
}

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
  reject_unknown(j, {"seed", "data", "classifier", "lgmvae", "lapace", "evaluation"}, "config");
  RunConfig c;
  read(j, "seed", c.seed, "config");

  if (!j.contains("data")) throw ConfigError("config: missing 'data' section");
  const json& d = j.at("data");
  reject_unknown(d, {"path", "schema", "split"}, "config.data");
  read(d, "path", c.data_path, "config.data");
  read(d, "schema", c.schema_path, "config.data");
  read(d, "split", c.split, "config.data");
  if (c.data_path.empty()) throw ConfigError("config.data: 'path' is required");
  if (c.schema_path.empty()) throw ConfigError("config.data: 'schema' is required");
  c.data_path = resolve(base_dir, c.data_path);
  c.schema_path = resolve(base_dir, c.schema_path);
  for (const auto* p : {&c.data_path, &c.schema_path}) {
    if (!std::filesystem::exists(*p)) throw ConfigError("config.data: file '" + *p + "' does not exist");
  }
  if (c.split.size() != 2) throw ConfigError("config.data: split needs [train, test] fractions");

  if (j.contains("classifier")) c.classifier = classifier_spec_from_json(j.at("classifier"));
  if (j.contains("lgmvae")) c.lgmvae = lgmvae_config_from_json(j.at("lgmvae"));

  if (j.contains("lapace")) {
    const json& l = j.at("lapace");
    reject_unknown(l, {"grid_steps", "constraints", "correction_learning_rate", "correction_iterations"},
                   "config.lapace");
    read(l, "grid_steps", c.grid_steps, "config.lapace");
    read(l, "correction_learning_rate", c.correction.learning_rate, "config.lapace");
    read(l, "correction_iterations", c.correction.max_iterations, "config.lapace");
    if (l.contains("constraints") && !l.at("constraints").is_null()) {
      std::string p;
      read(l, "constraints", p, "config.lapace");
      p = resolve(base_dir, p);
      if (!std::filesystem::exists(p)) {
        throw ConfigError("config.lapace: constraint file '" + p + "' does not exist");
      }
      c.constraints_path = p;
    }
    if (c.grid_steps < 2) throw ConfigError("config.lapace: grid_steps must be >= 2");
    if (!(c.correction.learning_rate >= 0.0)) {
      throw ConfigError("config.lapace: correction_learning_rate must be >= 0");
    }
  }

  json eval = j.value("evaluation", json::object());
  for (const char* key : {"seed", "grid_steps", "correction_learning_rate", "correction_iterations"}) {
    if (eval.contains(key)) {
      throw ConfigError(std::string("config.evaluation: '") + key +
                        "' is set elsewhere (top-level seed or lapace section)");
    }
  }
  c.evaluation = metrics::EvaluationConfig::from_json(eval);
  c.evaluation.grid_steps = c.grid_steps;
  c.evaluation.correction = c.correction;

  c.classifier.mlp.seed = c.classifier.forest.seed = derive_seed(c.seed, 2);
  c.lgmvae.seed = derive_seed(c.seed, 3);
  c.evaluation.seed = derive_seed(c.seed, 4);
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j, std::filesystem::path(path).parent_path().string());
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["data"] = {{"path", data_path}, {"schema", schema_path}, {"split", split}};
  j["classifier"] = io::to_json(classifier);
  j["lgmvae"] = io::to_json(lgmvae);
  j["lapace"] = {{"grid_steps", grid_steps},
                 {"correction_learning_rate", correction.learning_rate},
                 {"correction_iterations", correction.max_iterations}};
  if (constraints_path) j["lapace"]["constraints"] = *constraints_path;
  j["evaluation"] = evaluation.to_json();
  for (const char* key : {"seed", "grid_steps", "correction_learning_rate", "correction_iterations"}) {
    j["evaluation"].erase(key);
  }
  return j;
}

data::SplitSpec RunConfig::split_spec() const { return {split, derive_seed(seed, 1)}; }

RunData load_run_data(const RunConfig& config) {
  RunData out;
  out.schema = data::TabularSchema::load(config.schema_path);
  auto parts = data::split(data::read_csv(config.data_path, out.schema), config.split_spec());
  // normalization comes from the train split only
  if (!out.schema.is_fitted()) out.schema.fit(parts[0].rows);
  for (auto& part : parts) part.schema = out.schema;
  out.train = data::encode(parts[0]);
  out.test = data::encode(parts[1]);
  return out;
}

}  // namespace lapace::io
