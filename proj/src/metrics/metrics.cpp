#include "lapace/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lapace/error.hpp"
#include "lapace/lgmvae/model.hpp"

namespace lapace::metrics {

double l1(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("l1: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::fabs(a[j] - b[j]);
  return s;
}

double validity(const std::vector<CeSet>& ces, const classifiers::Classifier& classifier,
                int target) {
  if (ces.empty()) throw ValidationError("validity: empty test set");
  std::size_t valid = 0;
  for (const auto& set : ces) {
    valid += std::any_of(set.begin(), set.end(),
                         [&](const Point& p) { return classifier.predict(p) == target; });
  }
  return static_cast<double>(valid) / static_cast<double>(ces.size());
}

double proximity_l1(const std::vector<Point>& inputs, const std::vector<CeSet>& ces) {
  if (inputs.size() != ces.size()) throw ShapeError("proximity: one CE set per input required");
  if (inputs.empty()) throw ValidationError("proximity: empty test set");
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (ces[i].empty()) throw ValidationError("proximity: empty CE set");
    double s = 0.0;
    for (const auto& ce : ces[i]) s += l1(inputs[i], ce);
    total += s / static_cast<double>(ces[i].size());
  }
  return total / static_cast<double>(inputs.size());
}

double plausibility(const LofIndex& index, const std::vector<CeSet>& ces) {
  if (ces.empty()) throw ValidationError("plausibility: empty test set");
  double total = 0.0;
  for (const auto& set : ces) {
    if (set.empty()) throw ValidationError("plausibility: empty CE set");
    double s = 0.0;
    for (const auto& ce : set) s += index.score(ce);
    total += s / static_cast<double>(set.size());
  }
  return total / static_cast<double>(ces.size());
}

double diversity(const CeSet& set) {
  if (set.size() < 2) return kNoDiversity;
  double s = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t j = i + 1; j < set.size(); ++j, ++pairs) s += l1(set[i], set[j]);
  }
  return s / static_cast<double>(pairs);
}

double mean_diversity(const std::vector<CeSet>& ces) {
  double s = 0.0;
  std::size_t used = 0;
  for (const auto& set : ces) {
    if (set.size() < 2) continue;
    s += diversity(set);
    ++used;
  }
  return used == 0 ? kNoDiversity : s / static_cast<double>(used);
}

double model_robustness(const std::vector<CeSet>& ces, const classifiers::RetrainPool& pool,
                        int target) {
  if (pool.members.empty()) throw ValidationError("model robustness: empty retrain pool");
  std::size_t hits = 0, total = 0;
  for (const auto& set : ces) {
    for (const auto& ce : set) {
      for (const auto& m : pool.members) {
        hits += m->predict(ce) == target;
        ++total;
      }
    }
  }
  if (total == 0) throw ValidationError("model robustness: no CEs");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double hausdorff_l1(const CeSet& a, const CeSet& b) {
  if (a.empty() || b.empty()) throw ValidationError("hausdorff: empty set");
  auto directed = [](const CeSet& from, const CeSet& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, l1(p, q));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

double set_distance(const CeSet& a, const CeSet& b) {
  if (a.size() == 1 && b.size() == 1) return l1(a[0], b[0]);
  return hausdorff_l1(a, b);
}

std::vector<Point> perturb(std::span<const double> x, const data::TabularSchema& schema,
                           std::size_t count, double radius, std::uint64_t seed) {
  if (x.size() != schema.encoded_width()) throw ShapeError("perturb: width mismatch");
  if (!(radius >= 0.0)) throw ConfigError("perturb: radius must be >= 0");
  const auto categorical = schema.categorical_columns();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<Point> out;
  for (std::size_t n = 0; n < count; ++n) {
    Point p(x.begin(), x.end());
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (!categorical[j]) p[j] += u(rng);
    }
    out.push_back(std::move(p));
  }
  return out;
}

RobustnessResult input_robustness(const CeGenerator& method, std::span<const double> x,
                                  const data::TabularSchema& schema,
                                  const classifiers::Classifier& classifier,
                                  std::size_t count, double radius, std::uint64_t seed) {
  const int own = classifier.predict(x);
  const CeSet reference = method(x);
  RobustnessResult r;
  double total = 0.0;
  for (const auto& p : perturb(x, schema, count, radius, seed)) {
    if (classifier.predict(p) != own) {
      ++r.excluded;
      continue;
    }
    total += set_distance(reference, method(p));
    ++r.used;
  }
  r.mean_distance = r.used == 0 ? 0.0 : total / static_cast<double>(r.used);
  return r;
}

double actionability_rate(const std::vector<std::vector<recourse::LatentPath>>& path_sets,
                          int target) {
  if (path_sets.empty()) throw ValidationError("actionability: empty test set");
  std::size_t ok = 0;
  for (const auto& paths : path_sets) ok += recourse::actionable(paths, target);
  return static_cast<double>(ok) / static_cast<double>(path_sets.size());
}

TstrResult tstr_utility(const lgmvae::LgmvaeModel& model, const data::Dataset& train,
                        const data::Dataset& test, const classifiers::ClassifierSpec& trainer,
                        std::uint64_t seed) {
  if (!model.recourse_ready) throw ValidationError("tstr: model is not recourse-ready");
  const auto& train_labels = train.predicted();
  const auto& test_labels = test.predicted();
  const std::size_t classes = train.schema.num_classes();
  std::vector<std::size_t> counts(classes, 0);
  for (int y : train_labels) ++counts.at(static_cast<std::size_t>(y));
  const data::Dataset synthetic = lgmvae::sample(model, counts, seed);

  const auto real = classifiers::train_classifier(train.X, train_labels, classes, trainer);
  const auto synth = classifiers::train_classifier(synthetic.X, synthetic.predicted(), classes, trainer);
  return {classifiers::accuracy(*real, test.X, test_labels),
          classifiers::accuracy(*synth, test.X, test_labels)};
}

}  // namespace lapace::metrics
