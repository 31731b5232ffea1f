#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "httplib.h"
#include "lapace/data/blobs.hpp"
#include "lapace/error.hpp"
#include "lapace/io/artifact.hpp"
#include "lapace/io/config.hpp"
#include "lapace/io/features.hpp"
#include "lapace/io/service.hpp"
#include "lapace/lgmvae/train.hpp"
#include "lapace/metrics/evaluate.hpp"
#include "lapace/recourse/lapace.hpp"

namespace {

using namespace lapace;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

int cmd_make_blobs(std::uint64_t seed, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const data::RawTable raw = data::reference_blobs(seed);
  data::write_csv((fs::path(out_dir) / "data.csv").string(), raw);
  raw.schema.save((fs::path(out_dir) / "schema.json").string());
  const json config{
      {"seed", seed},
      {"data", {{"path", "data.csv"}, {"schema", "schema.json"}, {"split", {0.8, 0.2}}}},
      {"classifier", {{"kind", "random_forest"}, {"n_trees", 50}, {"max_depth", 8}}},
      {"lgmvae",
       {{"latent_dim", 5},
        {"clusters_per_class", 5},
        {"hidden", {64, 64, 64}},
        {"loss_weights", {0.1, 0.1, 1.0}},
        {"batch_size", 64},
        {"learning_rate", 1e-3},
        {"max_epochs", 2000},
        {"patience", 20}}},
      {"lapace", {{"grid_steps", 21}}},
      {"evaluation", {{"repeats", 5}, {"test_points", 100}}}};
  write_text((fs::path(out_dir) / "config.json").string(), config.dump(2) + "\n");
  std::printf("wrote %zu rows, schema and config to %s\n", raw.rows.size(), out_dir.c_str());
  return kExitOk;
}

int cmd_train_classifier(const std::string& config_path, const std::string& out) {
  const auto config = io::RunConfig::load(config_path);
  const auto run = io::load_run_data(config);
  const auto clf = classifiers::train_classifier(run.train.X, run.train.y_star,
                                                 run.schema.num_classes(), config.classifier);
  io::save_classifier(out, {run.schema, config.classifier, clf});
  std::printf("%s classifier: train accuracy %.4f, test accuracy %.4f\n",
              classifiers::to_string(config.classifier.kind),
              classifiers::accuracy(*clf, run.train.X, run.train.y_star),
              classifiers::accuracy(*clf, run.test.X, run.test.y_star));
  std::printf("saved %s\n", out.c_str());
  return kExitOk;
}

int cmd_train_lgmvae(const std::string& config_path, const std::string& clf_path,
                     const std::string& out, std::optional<std::size_t> max_epochs, bool verbose) {
  auto config = io::RunConfig::load(config_path);
  if (max_epochs) config.lgmvae.max_epochs = *max_epochs;
  const auto run = io::load_run_data(config);
  const auto clf = io::load_classifier(clf_path);
  if (!(clf.schema == run.schema)) {
    throw SchemaError("classifier artifact '" + clf_path + "' was trained on a different schema");
  }
  const auto train = classifiers::relabel_with_classifier(run.train, *clf.classifier);
  auto result = lgmvae::train(train, config.lgmvae, [&](const lgmvae::EpochRecord& r) {
    if (verbose) {
      std::printf("epoch %zu train %.6f validation %.6f\n", r.epoch, r.train_loss, r.validation_loss);
    }
  });
  const auto failing = lgmvae::validate_centroids(result.model, *clf.classifier);
  io::save_lgmvae(out, result.model);
  std::printf("trained %zu epochs (best %zu), validation loss %.6f -> %.6f\n", result.epochs_run,
              result.best_epoch, result.history.front().validation_loss,
              result.history[result.best_epoch].validation_loss);
  std::printf("saved %s (recourse-ready: %s)\n", out.c_str(),
              result.model.recourse_ready ? "yes" : "no");
  if (!failing.empty()) {
    std::fprintf(stderr, "centroid validation failed for %zu cluster(s):\n", failing.size());
    for (const auto& f : failing) {
      std::fprintf(stderr, "  cluster %zu: assigned label %d, classified as %d\n", f.cluster,
                   f.assigned_label, f.predicted_label);
    }
    return kExitValidation;
  }
  return kExitOk;
}

struct LoadedPair {
  std::shared_ptr<const lgmvae::LgmvaeModel> model;
  io::ClassifierArtifact classifier;
};

LoadedPair load_pair(const std::string& model_path, const std::string& clf_path) {
  LoadedPair p{std::make_shared<const lgmvae::LgmvaeModel>(io::load_lgmvae(model_path)),
               io::load_classifier(clf_path)};
  if (!(p.model->schema == p.classifier.schema)) {
    throw SchemaError("model '" + model_path + "' and classifier '" + clf_path +
                      "' use different schemas");
  }
  return p;
}

int cmd_generate(const std::string& model_path, const std::string& clf_path,
                 const std::string& input_path, int target, bool constrained,
                 const std::string& constraints_path, std::size_t grid_steps,
                 const std::string& out_path) {
  const auto pair = load_pair(model_path, clf_path);
  const auto& model = *pair.model;
  const auto& clf = *pair.classifier.classifier;
  const auto inputs = data::encode(data::read_csv(input_path, model.schema, false));
  const auto grid = recourse::TauGrid::uniform(grid_steps);
  recourse::ConstraintSpec spec;
  if (!constraints_path.empty()) spec = recourse::ConstraintSpec::load(constraints_path);
  const recourse::ConstraintSet constraints(spec, model.schema);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + out_path + "'");
  std::size_t lines = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto x = inputs.row(i);
    const auto paths =
        constrained ? recourse::generate_constrained_paths(model, clf, x, target, grid, constraints)
                    : recourse::generate_paths(model, clf, x, target, grid);
    for (const auto& p : paths) {
      for (const auto& e : p.entries) {
        json rec = io::entry_to_json(model.schema, e);
        rec["input"] = i;
        rec["cluster"] = p.cluster;
        rec["record"] = "entry";
        out << rec.dump() << '\n';
        ++lines;
      }
      const bool any_valid = std::any_of(p.entries.begin(), p.entries.end(),
                                         [&](const auto& e) { return e.label == target; });
      if (!any_valid) continue;
      const auto s = recourse::select_points(model, clf, p, target);
      for (const auto v : metrics::kVariants) {
        json rec = io::entry_to_json(model.schema, recourse::pick(s, v));
        rec["input"] = i;
        rec["cluster"] = p.cluster;
        rec["record"] = recourse::to_string(v);
        rec["flagged"] = p.flagged;
        out << rec.dump() << '\n';
      }
    }
  }
  std::printf("wrote %zu path entries for %zu input(s) to %s\n", lines, inputs.size(),
              out_path.c_str());
  return kExitOk;
}

int cmd_evaluate(const std::string& config_path, const std::string& model_path,
                 const std::string& clf_path, const std::string& out_path) {
  const auto config = io::RunConfig::load(config_path);
  const auto pair = load_pair(model_path, clf_path);
  const auto run = io::load_run_data(config);
  if (!(run.schema == pair.model->schema)) {
    throw SchemaError("config data schema differs from the model schema");
  }
  const auto& clf = *pair.classifier.classifier;
  const auto train = classifiers::relabel_with_classifier(run.train, clf);
  const auto test = classifiers::relabel_with_classifier(run.test, clf);
  std::optional<recourse::ConstraintSpec> constraints;
  if (config.constraints_path) constraints = recourse::ConstraintSpec::load(*config.constraints_path);
  const auto report = metrics::evaluate(
      {*pair.model, clf, train, test, pair.classifier.spec, constraints}, config.evaluation);
  write_text(out_path, report.to_json().dump(2) + "\n");
  if (!config.evaluation.record_runtime) {
    write_text(out_path + ".timing.json", report.timing_json().dump(2) + "\n");
  }
  for (const auto v : metrics::kVariants) {
    const auto& r = report.variant(v);
    std::printf("%-6s validity %.3f proximity %.3f lof %.3f diversity %.3f model-rob %.3f input-rob %.4f\n",
                recourse::to_string(v), r.validity.mean(), r.proximity.mean(),
                r.plausibility.mean(), r.diversity.mean(), r.model_robustness.mean(),
                r.input_robustness.mean());
  }
  std::printf("actionability constrained %.3f naive %.3f, tstr %.4f vs %.4f, centroid acc %.3f\n",
              report.actionability_constrained.mean(), report.actionability_naive.mean(),
              report.tstr_real.mean(), report.tstr_synthetic.mean(), report.centroid_accuracy);
  std::printf("saved %s\n", out_path.c_str());
  return kExitOk;
}

int cmd_sample(const std::string& model_path, int label, std::size_t n, std::uint64_t seed,
               const std::string& out_path) {
  const auto model = io::load_lgmvae(model_path);
  const auto synthetic = lgmvae::sample(model, label, n, seed);
  data::write_csv(out_path, synthetic.to_raw());
  std::printf("wrote %zu synthetic rows of label %d to %s\n", n, label, out_path.c_str());
  return kExitOk;
}

int cmd_serve(const std::string& model_path, const std::string& clf_path, const std::string& host,
              int port) {
  io::RecourseService service;
  httplib::Server server;
  service.mount(server);
  // Requests that arrive while the artifacts load are answered with 503.
  std::thread listener([&] { server.listen(host, port); });
  server.wait_until_ready();
  try {
    const auto pair = load_pair(model_path, clf_path);
    service.load(pair.model, pair.classifier.classifier);
  } catch (...) {
    server.stop();
    listener.join();
    throw;
  }
  std::printf("serving on http://%s:%d\n", host.c_str(), port);
  std::fflush(stdout);
  listener.join();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-path counterfactual explanations for tabular classifiers"};
  app.require_subcommand(1);

  std::string config, out, model, classifier, input, constraints, out_dir = ".", host = "127.0.0.1";
  std::uint64_t seed = 0;
  int target = 1, label = 1, port = 8080;
  std::size_t grid = 21, n = 1000, max_epochs = 0;
  bool constrained = false, verbose = false;

  auto* blobs = app.add_subcommand("make-blobs", "Write the reference blob dataset, schema and config");
  blobs->add_option("--seed", seed, "Data seed");
  blobs->add_option("--out-dir", out_dir, "Output directory");

  auto* tc = app.add_subcommand("train-classifier", "Train and save the black-box classifier");
  tc->add_option("--config", config, "Run config")->required();
  tc->add_option("--out", out, "Classifier artifact")->required();

  auto* tl = app.add_subcommand("train-lgmvae", "Train, validate and save the generative model");
  tl->add_option("--config", config, "Run config")->required();
  tl->add_option("--classifier", classifier, "Classifier artifact")->required();
  tl->add_option("--out", out, "Model artifact")->required();
  tl->add_option("--max-epochs", max_epochs, "Override the epoch limit");
  tl->add_flag("--verbose", verbose, "Print every epoch");

  auto* gen = app.add_subcommand("generate", "Write latent paths for every input row");
  gen->add_option("--model", model, "Model artifact")->required();
  gen->add_option("--classifier", classifier, "Classifier artifact")->required();
  gen->add_option("--input", input, "CSV of input rows (raw units)")->required();
  gen->add_option("--target", target, "Target label")->required();
  gen->add_flag("--constrained", constrained, "Correct path latents towards the constraints");
  gen->add_option("--constraints", constraints, "Constraint file");
  gen->add_option("--grid", grid, "Number of tau steps")->check(CLI::Range(2, 1001));
  gen->add_option("--out", out, "Paths output (JSON lines)")->required();

  auto* ev = app.add_subcommand("evaluate", "Run the metric suite and write a report");
  ev->add_option("--config", config, "Run config")->required();
  ev->add_option("--model", model, "Model artifact")->required();
  ev->add_option("--classifier", classifier, "Classifier artifact")->required();
  ev->add_option("--out", out, "Report file")->required();

  auto* smp = app.add_subcommand("sample", "Sample synthetic rows of one label");
  smp->add_option("--model", model, "Model artifact")->required();
  smp->add_option("--label", label, "Label to sample")->required();
  smp->add_option("--n", n, "Row count")->check(CLI::PositiveNumber);
  smp->add_option("--seed", seed, "Sampling seed");
  smp->add_option("--out", out, "CSV output")->required();

  auto* srv = app.add_subcommand("serve", "Serve the JSON API");
  srv->add_option("--model", model, "Model artifact")->required();
  srv->add_option("--classifier", classifier, "Classifier artifact")->required();
  srv->add_option("--host", host, "Bind address");
  srv->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*blobs) return cmd_make_blobs(seed, out_dir);
    if (*tc) return cmd_train_classifier(config, out);
    if (*tl) {
      return cmd_train_lgmvae(config, classifier, out,
                              max_epochs ? std::optional<std::size_t>(max_epochs) : std::nullopt,
                              verbose);
    }
    if (*gen) {
      return cmd_generate(model, classifier, input, target, constrained, constraints, grid, out);
    }
    if (*ev) return cmd_evaluate(config, model, classifier, out);
    if (*smp) return cmd_sample(model, label, n, seed, out);
    if (*srv) return cmd_serve(model, classifier, host, port);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
