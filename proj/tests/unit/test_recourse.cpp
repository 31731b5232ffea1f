#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lapace/error.hpp"
#include "lapace/recourse/constraints.hpp"
#include "lapace/recourse/lapace.hpp"
#include "oracles.hpp"

using namespace lapace;
using namespace lapace::recourse;
using lapace::diffmath::Tensor;

namespace {

data::TabularSchema three_feature_schema() {
  return data::TabularSchema(
      {{"age", data::FeatureKind::kContinuous, {}, data::MinMax{20, 70}},
       {"job", data::FeatureKind::kCategorical, {"a", "b"}, std::nullopt},
       {"income", data::FeatureKind::kContinuous, {}, data::MinMax{0, 100}},
       {"savings", data::FeatureKind::kContinuous, {}, data::MinMax{10, 30}}},
      "y", 2);
}

// Small mixed model marked recourse-ready so that path generation runs; the
// threshold classifier stands in for the black box.
struct ReadyModel {
  lgmvae::LgmvaeModel model;
  oracle::ThresholdClassifier classifier;
};

ReadyModel ready_model(std::uint64_t seed, std::size_t clusters = 5) {
  lgmvae::LgmvaeConfig cfg;
  cfg.latent_dim = 3;
  cfg.clusters_per_class = clusters;
  cfg.hidden = {8, 8};
  cfg.seed = seed;
  auto model = lgmvae::create_model(three_feature_schema(), cfg);
  model.recourse_ready = true;
  return {std::move(model), oracle::ThresholdClassifier(5, 0, 0.5)};
}

// An input the threshold classifier puts in class 0.
std::vector<double> class0_input() { return {0.2, 1, 0, 0.4, 0.6}; }

PathEntry entry(double tau, std::vector<double> z, int label) {
  return {tau, std::move(z), {}, label, 0, true};
}

}  // namespace

TEST(TauGrid, UniformAndValidation) {
  const auto g = TauGrid::uniform(21);
  ASSERT_EQ(g.size(), 21u);
  EXPECT_EQ(g.values().front(), 0.0);
  EXPECT_EQ(g.values().back(), 1.0);
  EXPECT_EQ(g.values()[10], 0.5);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g.values()[i], g.values()[i - 1]);
  EXPECT_NO_THROW(TauGrid({0.0, 0.3, 1.0}));
  EXPECT_THROW(TauGrid({0.0, 0.5, 0.5, 1.0}), ConfigError);
  EXPECT_THROW(TauGrid({0.1, 1.0}), ConfigError);
  EXPECT_THROW(TauGrid({0.0, 0.9}), ConfigError);
  EXPECT_THROW(TauGrid({0.0}), ConfigError);
  EXPECT_THROW(TauGrid::uniform(1), ConfigError);
}

TEST(Interpolate, MidpointAndEndpoints) {
  const std::vector<double> a{0, 0}, b{2, 4};
  EXPECT_EQ(interpolate(a, b, 0.5), (std::vector<double>{1, 2}));
  EXPECT_EQ(interpolate(a, b, 0.0), a);
  EXPECT_EQ(interpolate(a, b, 1.0), b);
  EXPECT_THROW(interpolate(a, std::vector<double>{1}, 0.5), ShapeError);
}

TEST(Interpolate, AffineInTauProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  const auto grid = TauGrid::uniform(41);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> zx(6), zc(6);
    for (auto& v : zx) v = u(rng);
    for (auto& v : zc) v = u(rng);
    std::uniform_int_distribution<std::size_t> idx(0, 20);
    const std::size_t i = 2 * idx(rng), j = 2 * idx(rng);  // same parity, midpoint on the grid
    const auto za = interpolate(zx, zc, grid.values()[i]);
    const auto zb = interpolate(zx, zc, grid.values()[j]);
    const auto zm = interpolate(zx, zc, grid.values()[(i + j) / 2]);
    for (std::size_t k = 0; k < 6; ++k) ASSERT_NEAR(za[k] + zb[k], 2.0 * zm[k], 1e-12);
  }
}

TEST(Constraints, JsonRoundTripAndShapes) {
  const auto j = nlohmann::json::parse(R"({"terms": [
      {"feature": "income", "min": 20},
      {"feature": "age", "max": 60, "min": 25},
      {"feature_a": "income", "feature_b": "savings", "relation": "greater"}]})");
  const ConstraintSpec spec = ConstraintSpec::from_json(j);
  ASSERT_EQ(spec.terms.size(), 3u);
  EXPECT_EQ(std::get<BoxConstraint>(spec.terms[0]), (BoxConstraint{"income", 20.0, std::nullopt}));
  EXPECT_EQ(ConstraintSpec::from_json(spec.to_json()), spec);
  EXPECT_EQ(ConstraintSpec::from_json(j.at("terms")), spec);
  EXPECT_EQ(term_to_json(spec.terms[0]), nlohmann::json::parse(R"({"feature": "income", "min": 20.0})"));
  EXPECT_TRUE(ConstraintSpec::from_json(nlohmann::json::array()).empty());
}

TEST(Constraints, MalformedTermsRejected) {
  auto bad = [](const char* text) {
    EXPECT_THROW(ConstraintSpec::from_json(nlohmann::json::parse(text)), SchemaError) << text;
  };
  bad(R"([{"feature": "income"}])");
  bad(R"([{"feature": "income", "min": "low"}])");
  bad(R"([{"feature_a": "income", "feature_b": "savings", "relation": "less"}])");
  bad(R"([{"feature_a": "income", "relation": "greater"}])");
  bad(R"({"items": []})");
  bad(R"([3])");
  EXPECT_THROW(ConstraintSpec::load("/nonexistent/c.json"), ConfigError);
}

TEST(Constraints, CompileAgainstSchema) {
  const auto schema = three_feature_schema();
  auto make = [&](const char* text) {
    return ConstraintSet(ConstraintSpec::from_json(nlohmann::json::parse(text)), schema);
  };
  EXPECT_THROW(make(R"([{"feature": "job", "min": 0}])"), SchemaError);
  EXPECT_THROW(make(R"([{"feature": "height", "min": 0}])"), SchemaError);
  EXPECT_THROW(make(R"([{"feature_a": "age", "feature_b": "age", "relation": "greater"}])"), SchemaError);

  // income >= 20 raw is 0.2 normalized: g = 0.2 - x
  const auto box = make(R"([{"feature": "income", "min": 20}])");
  ASSERT_EQ(box.terms().size(), 1u);
  EXPECT_NEAR(box.penalty(std::vector<double>{0, 1, 0, 0.15, 0}), 0.05, 1e-15);
  EXPECT_EQ(box.penalty(std::vector<double>{0, 1, 0, 0.25, 0}), 0.0);
  EXPECT_TRUE(box.satisfied(std::vector<double>{0, 1, 0, 0.2, 0}));
  EXPECT_TRUE(box.feasible());

  // age <= 45 raw is 0.5 normalized
  const auto top = make(R"([{"feature": "age", "max": 45}])");
  EXPECT_NEAR(top.penalty(std::vector<double>{0.8, 1, 0, 0, 0}), 0.3, 1e-15);

  EXPECT_FALSE(make(R"([{"feature": "age", "min": 50, "max": 40}])").feasible());
}

TEST(Constraints, PairwiseInRawUnitsScaledByLargerSpan) {
  const auto schema = three_feature_schema();
  const ConstraintSet pair(ConstraintSpec{{GreaterConstraint{"income", "savings"}}}, schema);
  // income 0.1 -> 10, savings 0.5 -> 20; g = (20 - 10) / 100
  EXPECT_NEAR(pair.penalty(std::vector<double>{0, 1, 0, 0.1, 0.5}), 0.1, 1e-15);
  // income 0.3 -> 30 >= savings 20
  EXPECT_EQ(pair.penalty(std::vector<double>{0, 1, 0, 0.3, 0.5}), 0.0);
  EXPECT_TRUE(pair.satisfied(std::vector<double>{0, 1, 0, 0.2, 0.5}));  // equality holds
}

TEST(Constraints, HingeSumDoesNotLetTermsCancel) {
  const auto schema = three_feature_schema();
  const ConstraintSet set(ConstraintSpec{{BoxConstraint{"income", 50.0, std::nullopt},
                                          BoxConstraint{"age", std::nullopt, 70.0}}},
                          schema);
  // income violated by 0.1, age satisfied with slack 0.5
  EXPECT_NEAR(set.penalty(std::vector<double>{0.5, 1, 0, 0.4, 0}), 0.1, 1e-15);
}

TEST(Constraints, TapePenaltyMatchesScalar) {
  const auto schema = three_feature_schema();
  const ConstraintSet set(ConstraintSpec{{BoxConstraint{"income", 30.0, 60.0},
                                          GreaterConstraint{"savings", "age"}}},
                          schema);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  Tensor x = Tensor::zeros(30, 5);
  for (double& v : x.data()) v = u(rng);
  diffmath::Tape t;
  const Tensor g = set.penalty(t.constant(x)).value();
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(g[i], set.penalty(x.row_span(i)), 1e-14);
}

TEST(Constraints, NaiveClampRule) {
  const auto schema = three_feature_schema();
  const ConstraintSet set(ConstraintSpec{{GreaterConstraint{"income", "savings"},
                                          BoxConstraint{"age", 30.0, 40.0}}},
                          schema);
  const auto out = set.clamp(std::vector<double>{0.9, 0, 1, 0.1, 0.5});
  EXPECT_NEAR(out[0], 0.4, 1e-15);  // age clamped to 40
  EXPECT_NEAR(out[3], 0.2, 1e-15);  // income raised to savings = 20
  EXPECT_EQ(out[4], 0.5);
  EXPECT_EQ(out[1], 0.0);
  EXPECT_TRUE(set.satisfied(out));
}

TEST(Correction, SatisfiedOrEmptyIsNoOp) {
  const auto rm = ready_model(1);
  const std::vector<double> z{0.3, -0.2, 0.1};
  const auto empty = correct_latent(rm.model, z, ConstraintSet(), {});
  EXPECT_EQ(empty.latent, z);
  EXPECT_EQ(empty.iterations, 0u);
  const ConstraintSet loose(ConstraintSpec{{BoxConstraint{"income", -1e9, 1e9}}}, rm.model.schema);
  const auto r = correct_latent(rm.model, z, loose, {});
  EXPECT_EQ(r.latent, z);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_TRUE(r.satisfied());
}

TEST(Correction, ZeroStepSizeSpendsAllIterations) {
  const auto rm = ready_model(2);
  const std::vector<double> z{0.3, -0.2, 0.1};
  const ConstraintSet impossible(ConstraintSpec{{BoxConstraint{"income", 1e6, std::nullopt}}},
                                 rm.model.schema);
  const auto r = correct_latent(rm.model, z, impossible, CorrectionConfig{0.0, 50});
  EXPECT_EQ(r.latent, z);
  EXPECT_EQ(r.iterations, 50u);
  EXPECT_FALSE(r.satisfied());
  EXPECT_THROW(correct_latent(rm.model, z, impossible, CorrectionConfig{-1.0, 5}), ConfigError);
  EXPECT_THROW(correct_latent(rm.model, std::vector<double>{0, 0}, impossible, {}), ShapeError);
}

TEST(Correction, PenaltyNeverIncreasesAcrossIterations) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto rm = ready_model(seed);
    const ConstraintSet set(ConstraintSpec{{BoxConstraint{"income", 60.0, std::nullopt},
                                            GreaterConstraint{"savings", "age"}}},
                            rm.model.schema);
    const std::vector<double> z{0.5, -0.5, 0.25};
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n <= 40; ++n) {
      const auto r = correct_latent(rm.model, z, set, CorrectionConfig{0.5, n});
      EXPECT_LE(r.penalty, previous + 1e-15) << "seed " << seed << " n " << n;
      EXPECT_LE(r.iterations, n);
      previous = r.penalty;
    }
  }
}

TEST(Correction, ReportedPenaltyIsTheSoftDecodePenalty) {
  const auto rm = ready_model(4);
  const ConstraintSet set(ConstraintSpec{{BoxConstraint{"savings", 25.0, std::nullopt}}},
                          rm.model.schema);
  const auto r = correct_latent(rm.model, std::vector<double>{0.1, 0.2, 0.3}, set, {0.05, 7});
  const Tensor soft = lgmvae::decode(rm.model, Tensor::row(r.latent), lgmvae::DecodeMode::kTraining);
  EXPECT_NEAR(r.penalty, set.penalty(soft.row_span(0)), 1e-12);
}

TEST(Paths, CountsEndpointsAndAffinity) {
  const auto rm = ready_model(5);
  const auto x = class0_input();
  ASSERT_EQ(rm.classifier.predict(x), 0);
  const auto paths = generate_paths(rm.model, rm.classifier, x, 1, TauGrid::uniform(21));
  ASSERT_EQ(paths.size(), 5u);
  const auto z_x = encode_input(rm.model, x, 0);
  const auto cents = lgmvae::centroids(rm.model, 1);
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const auto& p = paths[k];
    EXPECT_EQ(p.cluster, rm.model.partition.clusters_of(1)[k]);
    ASSERT_EQ(p.entries.size(), 21u);
    EXPECT_EQ(p.entries.front().latent, z_x);
    EXPECT_EQ(p.entries.back().latent, cents[k].latent);
    EXPECT_EQ(p.entries.back().decoded, cents[k].decoded);  // bit-exact
    EXPECT_EQ(p.flagged, p.entries.back().label != 1);
    for (const auto& e : p.entries) {
      EXPECT_EQ(e.label, rm.classifier.predict(e.decoded));
      EXPECT_EQ(e.corrections, 0u);
      for (std::size_t j = 0; j < 3; ++j) {
        const double lo = std::min(z_x[j], cents[k].latent[j]);
        const double hi = std::max(z_x[j], cents[k].latent[j]);
        EXPECT_GE(e.latent[j], lo - 1e-12);
        EXPECT_LE(e.latent[j], hi + 1e-12);
      }
    }
    for (std::size_t i = 0; i + 2 < 21; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(p.entries[i].latent[j] + p.entries[i + 2].latent[j],
                    2.0 * p.entries[i + 1].latent[j], 1e-12);
      }
    }
  }
}

TEST(Paths, LastEntryIndependentOfInput) {
  const auto rm = ready_model(6);
  const auto a = generate_paths(rm.model, rm.classifier, class0_input(), 1, TauGrid::uniform(11));
  const auto b = generate_paths(rm.model, rm.classifier, std::vector<double>{0.45, 0, 1, 0.9, 0.1}, 1,
                                TauGrid::uniform(7));
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].entries.back().decoded, b[k].entries.back().decoded);
    EXPECT_EQ(a[k].entries.back().latent, b[k].entries.back().latent);
  }
}

TEST(Paths, PreconditionErrors) {
  auto rm = ready_model(7);
  const auto x = class0_input();
  const auto grid = TauGrid::uniform(5);
  EXPECT_THROW(generate_paths(rm.model, rm.classifier, x, 0, grid), ValidationError);
  EXPECT_THROW(generate_paths(rm.model, rm.classifier, x, 2, grid), ValidationError);
  EXPECT_THROW(generate_paths(rm.model, rm.classifier, std::vector<double>{0.1, 1, 0}, 1, grid),
               ShapeError);
  rm.model.recourse_ready = false;
  EXPECT_THROW(generate_paths(rm.model, rm.classifier, x, 1, grid), ValidationError);
  EXPECT_THROW(generate_constrained_paths(rm.model, rm.classifier, x, 1, grid, ConstraintSet()),
               ValidationError);
}

TEST(Paths, EmptyConstraintsGiveUnconstrainedOutput) {
  const auto rm = ready_model(8);
  const auto x = class0_input();
  const auto grid = TauGrid::uniform(9);
  const auto plain = generate_paths(rm.model, rm.classifier, x, 1, grid);
  const auto cons = generate_constrained_paths(rm.model, rm.classifier, x, 1, grid,
                                               ConstraintSet(ConstraintSpec{}, rm.model.schema));
  ASSERT_EQ(plain.size(), cons.size());
  for (std::size_t k = 0; k < plain.size(); ++k) {
    EXPECT_EQ(plain[k].flagged, cons[k].flagged);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      EXPECT_EQ(plain[k].entries[i].latent, cons[k].entries[i].latent);
      EXPECT_EQ(plain[k].entries[i].decoded, cons[k].entries[i].decoded);
      EXPECT_EQ(plain[k].entries[i].label, cons[k].entries[i].label);
    }
  }
}

TEST(Paths, ConstrainedEntriesAreSatisfiedOrMarked) {
  const auto rm = ready_model(9);
  const ConstraintSet set(ConstraintSpec{{BoxConstraint{"savings", 12.0, 28.0}}}, rm.model.schema);
  const auto paths = generate_constrained_paths(rm.model, rm.classifier, class0_input(), 1,
                                                TauGrid::uniform(11), set);
  for (const auto& p : paths) {
    for (const auto& e : p.entries) {
      EXPECT_EQ(e.satisfied, set.satisfied(e.decoded));
      EXPECT_LE(e.corrections, 50u);
      if (!e.satisfied) {
        EXPECT_EQ(e.corrections, 50u);  // only unfinished corrections leave violations
      }
    }
  }
}

TEST(Paths, NaiveClampingSatisfiesBoxes) {
  const auto rm = ready_model(10);
  const ConstraintSet set(ConstraintSpec{{BoxConstraint{"income", 40.0, 60.0}}}, rm.model.schema);
  const auto paths = generate_naive_paths(rm.model, rm.classifier, class0_input(), 1,
                                          TauGrid::uniform(6), set);
  for (const auto& p : paths) {
    for (const auto& e : p.entries) {
      EXPECT_TRUE(e.satisfied);
      EXPECT_TRUE(set.satisfied(e.decoded));
      EXPECT_EQ(e.label, rm.classifier.predict(e.decoded));
    }
  }
}

TEST(Select, FirstFlipMiddleAndLast) {
  const auto rm = ready_model(11);
  LatentPath path;
  path.cluster = 7;
  const auto grid = TauGrid::uniform(11);
  for (double tau : grid.values()) {
    path.entries.push_back(entry(tau, {tau, 2 * tau, -tau}, tau >= 0.7 - 1e-12 ? 1 : 0));
  }
  const auto s = select_points(rm.model, rm.classifier, path, 1);
  EXPECT_DOUBLE_EQ(s.first.tau, 0.7);
  EXPECT_EQ(s.last.tau, 1.0);
  EXPECT_EQ(s.middle.latent, (std::vector<double>{0.5 * (0.7 + 1.0), 0.5 * (1.4 + 2.0), -0.5 * 1.7}));
  const Tensor dec = lgmvae::decode(rm.model, Tensor::row(s.middle.latent), lgmvae::DecodeMode::kInference);
  EXPECT_EQ(s.middle.decoded, std::vector<double>(dec.data().begin(), dec.data().end()));
  EXPECT_EQ(s.middle.label, rm.classifier.predict(s.middle.decoded));
  EXPECT_EQ(&pick(s, Variant::kFirst), &s.first);
  EXPECT_STREQ(to_string(Variant::kMiddle), "middle");
}

TEST(Select, FlipAtStartAndNoFlip) {
  const auto rm = ready_model(12);
  LatentPath path;
  path.entries = {entry(0.0, {0, 0, 0}, 1), entry(0.5, {1, 1, 1}, 0), entry(1.0, {2, 2, 2}, 1)};
  EXPECT_EQ(select_points(rm.model, rm.classifier, path, 1).first.tau, 0.0);
  path.entries.back().label = 0;
  path.entries.front().label = 0;
  EXPECT_THROW(select_points(rm.model, rm.classifier, path, 1), ValidationError);
  EXPECT_THROW(select_points(rm.model, rm.classifier, LatentPath{}, 1), ValidationError);
}

TEST(Select, FlipOnlyAtEndMakesMiddleTheLast) {
  const auto rm = ready_model(13);
  LatentPath path;
  path.entries = {entry(0.0, {0, 0, 0}, 0), entry(1.0, {0.5, -1, 2}, 1)};
  const auto s = select_points(rm.model, rm.classifier, path, 1);
  EXPECT_EQ(s.middle.latent, s.last.latent);
  EXPECT_EQ(s.middle.tau, 1.0);
}

TEST(Actionable, NeedsValidAndSatisfiedEntry) {
  LatentPath p;
  p.entries = {entry(0.0, {}, 1), entry(1.0, {}, 0)};
  p.entries[0].satisfied = false;
  EXPECT_FALSE(actionable({p}, 1));
  p.entries[1].label = 1;
  EXPECT_TRUE(actionable({p}, 1));
  EXPECT_FALSE(actionable({}, 1));
}

TEST(Correction, FirstStepFollowsTheFiniteDifferenceGradient) {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto rm = ready_model(seed);
    const ConstraintSet set(ConstraintSpec{{BoxConstraint{"income", 90.0, std::nullopt},
                                            BoxConstraint{"savings", std::nullopt, 11.0}}},
                            rm.model.schema);
    const std::vector<double> z{0.4, -0.3, 0.2};
    auto g_at = [&](const std::vector<double>& v) {
      const Tensor soft = lgmvae::decode(rm.model, Tensor::row(v), lgmvae::DecodeMode::kTraining);
      return set.penalty(soft.row_span(0));
    };
    const double g0 = g_at(z);
    ASSERT_GT(g0, 0.0);
    double norm2 = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      auto up = z, down = z;
      up[k] += 1e-6;
      down[k] -= 1e-6;
      const double d = (g_at(up) - g_at(down)) / 2e-6;
      norm2 += d * d;
    }
    const double eta = 1e-4;
    const auto r = correct_latent(rm.model, z, set, CorrectionConfig{eta, 1});
    EXPECT_NEAR(g0 - r.penalty, eta * norm2, 1e-3 * eta * norm2 + 1e-12) << "seed " << seed;
  }
}
