#include "lapace/classifiers/retrain_pool.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "lapace/error.hpp"
#include "lapace/seeding.hpp"

namespace lapace::classifiers {

const char* to_string(ClassifierKind kind) {
  return kind == ClassifierKind::kMlp ? "mlp" : "random_forest";
}

ClassifierKind classifier_kind_from_string(const std::string& name) {
  if (name == "mlp") return ClassifierKind::kMlp;
  if (name == "random_forest" || name == "rf") return ClassifierKind::kRandomForest;
  throw ConfigError("unknown classifier kind '" + name + "' (expected mlp or random_forest)");
}

std::shared_ptr<Classifier> train_classifier(const Tensor& X, std::span<const int> labels,
                                             std::size_t num_classes, const ClassifierSpec& spec) {
  if (spec.kind == ClassifierKind::kMlp) {
    return std::make_shared<MlpClassifier>(train_mlp_classifier(X, labels, num_classes, spec.mlp));
  }
  return std::make_shared<RandomForest>(train_random_forest(X, labels, num_classes, spec.forest));
}

RetrainPool build_retrain_pool(const data::Dataset& dataset, const ClassifierSpec& base,
                               std::size_t pool_size, double subset_fraction, std::uint64_t seed) {
  if (pool_size == 0) throw ConfigError("retrain pool: pool_size must be >= 1");
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
    throw ConfigError("retrain pool: subset_fraction must lie in (0, 1]");
  }
  const std::size_t n = dataset.size();
  const auto take = static_cast<std::size_t>(std::floor(subset_fraction * static_cast<double>(n) + 1e-9));

  RetrainPool pool;
  pool.subset_fraction = subset_fraction;
  for (std::size_t m = 0; m < pool_size; ++m) {
    const std::uint64_t member_seed = derive_seed(seed, m);
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (take < n) {
      std::mt19937_64 rng(member_seed);
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(take);
      std::sort(rows.begin(), rows.end());
    }
    const data::Dataset subset = dataset.subset(rows);
    const std::set<int> classes(subset.y_star.begin(), subset.y_star.end());
    if (classes.size() < 2) {
      throw ValidationError("retrain pool: member " + std::to_string(m) +
                            " subset contains fewer than two classes");
    }
    pool.members.push_back(
        train_classifier(subset.X, subset.y_star, dataset.schema.num_classes(), base));
    pool.subset_seeds.push_back(member_seed);
  }
  return pool;
}

}  // namespace lapace::classifiers
