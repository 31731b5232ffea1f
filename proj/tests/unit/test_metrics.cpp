#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lapace/classifiers/classifier.hpp"
#include "lapace/data/blobs.hpp"
#include "lapace/error.hpp"
#include "lapace/metrics/evaluate.hpp"
#include "lapace/metrics/lof.hpp"
#include "lapace/metrics/metrics.hpp"
#include "oracles.hpp"

using namespace lapace;
using namespace lapace::metrics;

namespace {

oracle::Points random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  oracle::Points pts(n, std::vector<double>(d));
  for (auto& p : pts) {
    for (double& v : p) v = g(rng);
  }
  return pts;
}

Tensor to_tensor(const oracle::Points& pts) {
  Tensor t = Tensor::zeros(pts.size(), pts[0].size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::copy(pts[i].begin(), pts[i].end(), t.row_span(i).begin());
  }
  return t;
}

CeSet random_set(std::mt19937_64& rng, std::size_t d) {
  std::uniform_int_distribution<std::size_t> size(1, 5);
  std::uniform_real_distribution<double> u(-1, 1);
  CeSet s(size(rng), Point(d));
  for (auto& p : s) {
    for (double& v : p) v = u(rng);
  }
  return s;
}

data::TabularSchema mixed_schema() {
  return data::TabularSchema(
      {{"a", data::FeatureKind::kContinuous, {}, data::MinMax{0, 1}},
       {"c", data::FeatureKind::kCategorical, {"x", "y"}, std::nullopt},
       {"b", data::FeatureKind::kContinuous, {}, data::MinMax{0, 1}}},
      "y", 2);
}

}  // namespace

TEST(Lof, MatchesBruteForceOracle) {
  for (std::size_t n : {30u, 120u, 500u}) {
    const auto ref = random_points(n, 4, n);
    const auto queries = random_points(20, 4, n + 1);
    for (std::size_t k : {5u, 10u, 20u}) {
      const LofIndex index(to_tensor(ref), k);
      for (const auto& q : queries) {
        ASSERT_NEAR(index.score(q), oracle::brute_lof(ref, q, k), 1e-9) << "n " << n << " k " << k;
      }
      for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 25)) {
        ASSERT_NEAR(index.score_reference(i), oracle::brute_lof(ref, ref[i], k, static_cast<long>(i)),
                    1e-9);
      }
    }
  }
}

TEST(Lof, DuplicatePointsStayFinite) {
  oracle::Points ref(10, std::vector<double>{1.0, 2.0});
  ref.push_back({3.0, 3.0});
  const LofIndex index(to_tensor(ref), 5);
  const std::vector<double> q{1.0, 2.0};
  EXPECT_TRUE(std::isfinite(index.score(q)));
  EXPECT_NEAR(index.score(q), oracle::brute_lof(ref, q, 5), 1e-9);
}

TEST(Lof, InteriorNearOneAndOutlierLarge) {
  const auto ref = random_points(400, 2, 9);
  const LofIndex index(to_tensor(ref), 20);
  const double interior = index.score(std::vector<double>{0.0, 0.0});
  EXPECT_GE(interior, 0.8);
  EXPECT_LE(interior, 1.2);
  EXPECT_GT(index.score(std::vector<double>{10.0, 10.0}), 2.0);
  std::vector<double> scores;
  for (std::size_t i = 0; i < ref.size(); ++i) scores.push_back(index.score_reference(i));
  std::nth_element(scores.begin(), scores.begin() + 200, scores.end());
  EXPECT_NEAR(scores[200], 1.0, 0.1);
}

TEST(Lof, InvalidK) {
  const auto ref = random_points(10, 2, 1);
  EXPECT_THROW(LofIndex(to_tensor(ref), 0), ConfigError);
  EXPECT_THROW(LofIndex(to_tensor(ref), 10), ConfigError);
  EXPECT_NO_THROW(LofIndex(to_tensor(ref), 9));
  const LofIndex index(to_tensor(ref), 3);
  EXPECT_THROW(index.score(std::vector<double>{1.0}), ShapeError);
}

TEST(Metrics, ProximityAndDiversityExamples) {
  const std::vector<Point> inputs{{0, 0}, {1, 1}};
  const std::vector<CeSet> ces{{{1, 2}, {3, 0}}, {{1, 1}}};
  // (3 + 3) / 2 for the first input, 0 for the second
  EXPECT_DOUBLE_EQ(proximity_l1(inputs, ces), 1.5);
  EXPECT_DOUBLE_EQ(diversity(ces[0]), 4.0);
  EXPECT_EQ(diversity(ces[1]), kNoDiversity);
  EXPECT_EQ(diversity({}), kNoDiversity);
  EXPECT_DOUBLE_EQ(diversity({{0, 0}, {1, 0}, {0, 2}}), (1.0 + 2.0 + 3.0) / 3.0);
  EXPECT_DOUBLE_EQ(mean_diversity(ces), 4.0);
  EXPECT_EQ(mean_diversity({{{1, 1}}}), kNoDiversity);
  EXPECT_THROW(proximity_l1(inputs, {ces[0]}), ShapeError);
  EXPECT_THROW(proximity_l1({{0, 0}}, {{}}), ValidationError);
  EXPECT_THROW(l1(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
}

TEST(Metrics, ValidityCountsSetsWithAnyTargetCe) {
  const oracle::ThresholdClassifier clf(2, 0, 0.5);
  const std::vector<CeSet> ces{{{0.9, 0}}, {{0.1, 0}, {0.7, 0}}, {{0.2, 0}}, {{0.5, 0}}};
  EXPECT_DOUBLE_EQ(validity(ces, clf, 1), 0.5);
  EXPECT_DOUBLE_EQ(validity(ces, clf, 0), 0.75);
  EXPECT_THROW(validity({}, clf, 1), ValidationError);
}

TEST(Metrics, PlausibilityAveragesLof) {
  const auto ref = random_points(60, 2, 4);
  const LofIndex index(to_tensor(ref), 5);
  const std::vector<CeSet> ces{{{0, 0}, {1, 1}}, {{2, -1}}};
  const double expected = 0.5 * (0.5 * (index.score(ces[0][0]) + index.score(ces[0][1])) +
                                 index.score(ces[1][0]));
  EXPECT_NEAR(plausibility(index, ces), expected, 1e-15);
}

TEST(Metrics, HausdorffAxioms) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const CeSet a = random_set(rng, 3), b = random_set(rng, 3), c = random_set(rng, 3);
    const double ab = hausdorff_l1(a, b);
    ASSERT_EQ(hausdorff_l1(a, a), 0.0);
    ASSERT_GE(ab, 0.0);
    ASSERT_EQ(ab, hausdorff_l1(b, a));
    ASSERT_LE(hausdorff_l1(a, c), ab + hausdorff_l1(b, c) + 1e-12);
  }
  EXPECT_THROW(hausdorff_l1({}, {{1.0}}), ValidationError);
}

TEST(Metrics, HausdorffExampleAndSetDistance) {
  const CeSet a{{0, 0}, {4, 0}}, b{{0, 1}};
  EXPECT_DOUBLE_EQ(hausdorff_l1(a, b), 5.0);  // (4,0) is 5 away from (0,1)
  EXPECT_DOUBLE_EQ(set_distance({{1, 2}}, {{3, 3}}), 3.0);
  EXPECT_DOUBLE_EQ(set_distance(a, b), 5.0);
}

TEST(Metrics, ModelRobustnessWithClonePoolEqualsValidity) {
  const auto clf = std::make_shared<oracle::ThresholdClassifier>(2, 0, 0.5);
  classifiers::RetrainPool pool;
  pool.members.assign(20, clf);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<CeSet> ces;
  for (int i = 0; i < 200; ++i) ces.push_back({{u(rng), u(rng)}});
  EXPECT_DOUBLE_EQ(model_robustness(ces, pool, 1), validity(ces, *clf, 1));
  EXPECT_THROW(model_robustness(ces, classifiers::RetrainPool{}, 1), ValidationError);
  EXPECT_THROW(model_robustness({}, pool, 1), ValidationError);
}

TEST(Metrics, ModelRobustnessMixedPool) {
  classifiers::RetrainPool pool;
  pool.members = {std::make_shared<oracle::ThresholdClassifier>(1, 0, 0.5),
                  std::make_shared<oracle::ThresholdClassifier>(1, 0, 0.8)};
  // 0.6: one of two; 0.9: two of two
  EXPECT_DOUBLE_EQ(model_robustness({{{0.6}}, {{0.9}}}, pool, 1), 0.75);
}

TEST(Metrics, PerturbTouchesContinuousColumnsOnly) {
  const auto schema = mixed_schema();
  const std::vector<double> x{0.5, 0, 1, 0.2};
  const auto ps = perturb(x, schema, 500, 0.01, 3);
  ASSERT_EQ(ps.size(), 500u);
  for (const auto& p : ps) {
    EXPECT_EQ(p[1], 0.0);
    EXPECT_EQ(p[2], 1.0);
    EXPECT_LE(std::fabs(p[0] - 0.5), 0.01);
    EXPECT_LE(std::fabs(p[3] - 0.2), 0.01);
  }
  EXPECT_EQ(perturb(x, schema, 5, 0.01, 3), perturb(x, schema, 5, 0.01, 3));
  EXPECT_THROW(perturb(std::vector<double>{0.5}, schema, 5, 0.01, 3), ShapeError);
  EXPECT_THROW(perturb(x, schema, 5, -1.0, 3), ConfigError);
}

TEST(Metrics, InputRobustnessOfConstantMethodIsZero) {
  const auto schema = mixed_schema();
  const oracle::ThresholdClassifier clf(4, 0, 0.5);
  const CeGenerator constant = [](std::span<const double>) { return CeSet{{1, 0, 1, 1}}; };
  const auto r = input_robustness(constant, std::vector<double>{0.2, 0, 1, 0.2}, schema, clf, 10,
                                  0.01, 1);
  EXPECT_EQ(r.mean_distance, 0.0);
  EXPECT_EQ(r.used, 10u);
  EXPECT_EQ(r.excluded, 0u);
}

TEST(Metrics, InputRobustnessOfIdentityIsMeanPerturbation) {
  const auto schema = mixed_schema();
  const oracle::ThresholdClassifier clf(4, 0, 0.5);
  const std::vector<double> x{0.2, 0, 1, 0.2};
  const CeGenerator identity = [](std::span<const double> p) { return CeSet{Point(p.begin(), p.end())}; };
  const auto r = input_robustness(identity, x, schema, clf, 10, 0.01, 7);
  double expected = 0.0;
  for (const auto& p : perturb(x, schema, 10, 0.01, 7)) expected += l1(x, p);
  EXPECT_NEAR(r.mean_distance, expected / 10.0, 1e-15);
}

TEST(Metrics, InputRobustnessExcludesLabelChanges) {
  const auto schema = mixed_schema();
  const oracle::ThresholdClassifier clf(4, 0, 0.5);
  // On the decision boundary: roughly half of the perturbations flip the label.
  const CeGenerator identity = [](std::span<const double> p) { return CeSet{Point(p.begin(), p.end())}; };
  const auto r = input_robustness(identity, std::vector<double>{0.5, 0, 1, 0.5}, schema, clf, 200,
                                  0.01, 2);
  EXPECT_EQ(r.used + r.excluded, 200u);
  EXPECT_GT(r.excluded, 60u);
  EXPECT_GT(r.used, 60u);
}

TEST(Metrics, ActionabilityRate) {
  auto path = [](int label, bool satisfied) {
    recourse::LatentPath p;
    p.entries = {{0.0, {}, {}, 0, 0, true}, {1.0, {}, {}, label, 0, satisfied}};
    return p;
  };
  const std::vector<std::vector<recourse::LatentPath>> sets{
      {path(1, true)}, {path(1, false)}, {path(0, true), path(1, true)}, {path(0, true)}};
  EXPECT_DOUBLE_EQ(actionability_rate(sets, 1), 0.5);
  EXPECT_THROW(actionability_rate({}, 1), ValidationError);
}

TEST(Metrics, TstrNeedsReadyModel) {
  const auto model = oracle::random_model(1);
  data::Dataset d;
  EXPECT_THROW(tstr_utility(model, d, d, {}, 0), ValidationError);
}

TEST(Evaluation, ConfigJsonIsStrict) {
  EvaluationConfig c;
  c.repeats = 3;
  c.radius = 0.05;
  c.correction.max_iterations = 7;
  const auto back = EvaluationConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(EvaluationConfig::from_json(nlohmann::json::object()).to_json(), EvaluationConfig{}.to_json());
  auto bad = [](const char* text) {
    EXPECT_THROW(EvaluationConfig::from_json(nlohmann::json::parse(text)), ConfigError) << text;
  };
  bad(R"({"repeat": 3})");
  bad(R"({"repeats": 0})");
  bad(R"({"repeats": "five"})");
  bad(R"({"source_label": 1, "target_label": 1})");
  bad(R"({"pool_fraction": 0})");
  bad(R"({"pool_fraction": 1.5})");
  bad(R"({"grid_steps": 1})");
  bad(R"({"radius": -0.1})");
  bad(R"({"constraints_per_input": 11})");
  bad(R"([1])");
}

TEST(Evaluation, SummaryStatistics) {
  const Summary s{{1.0, 2.0, 3.0, 4.0}};
  EXPECT_DOUBLE_EQ(s.mean(), 2.5);
  EXPECT_NEAR(s.stddev(), std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(Summary{{2.0}}.stddev(), 0.0);
  EXPECT_EQ(s.to_json().at("values").size(), 4u);
}

TEST(Evaluation, SyntheticConstraintsHoldForMostTargetRows) {
  const data::RawTable raw = data::reference_blobs(4);
  data::TabularSchema schema = raw.schema;
  schema.fit(raw.rows);
  data::RawTable fitted = raw;
  fitted.schema = schema;
  data::Dataset d = data::encode(fitted);
  d.y_pred = d.y_star;

  const auto spec = synthetic_constraints(d, 1, 10, 3);
  EXPECT_EQ(spec.terms.size(), 10u);
  EXPECT_EQ(spec, synthetic_constraints(d, 1, 10, 3));
  EXPECT_NE(spec, synthetic_constraints(d, 1, 10, 4));
  EXPECT_NO_THROW(recourse::ConstraintSet(spec, schema));

  std::vector<std::size_t> target_rows;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.y_star[i] == 1) target_rows.push_back(i);
  }
  for (const auto& term : spec.terms) {
    const recourse::ConstraintSet one(recourse::ConstraintSpec{{term}}, schema);
    std::size_t ok = 0;
    for (std::size_t i : target_rows) ok += one.satisfied(d.row(i));
    const double rate = static_cast<double>(ok) / static_cast<double>(target_rows.size());
    if (std::holds_alternative<recourse::BoxConstraint>(term)) {
      EXPECT_GE(rate, 0.89);
    } else {
      EXPECT_GE(rate, 0.5);
    }
  }
  d.y_pred = std::vector<int>(d.size(), 0);
  EXPECT_THROW(synthetic_constraints(d, 1, 10, 3), ValidationError);
}
