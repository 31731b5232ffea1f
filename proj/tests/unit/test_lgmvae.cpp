#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "lapace/error.hpp"
#include "lapace/lgmvae/model.hpp"
#include "lapace/lgmvae/train.hpp"
#include "oracles.hpp"

using namespace lapace;
using namespace lapace::lgmvae;
using lapace::diffmath::Tape;
using lapace::diffmath::Tensor;

namespace {

// Random encoded rows valid for `schema`: continuous in [0, 1], exact one-hot groups.
Tensor random_rows(const data::TabularSchema& schema, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor x = Tensor::zeros(n, schema.encoded_width());
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& s : schema.spans()) {
      if (schema.features()[s.feature].kind == data::FeatureKind::kContinuous) {
        x.row_span(i)[s.begin] = u(rng);
      } else {
        std::uniform_int_distribution<std::size_t> pick(s.begin, s.end - 1);
        x.row_span(i)[pick(rng)] = 1.0;
      }
    }
  }
  return x;
}

Tensor normal_noise(std::size_t n, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t = Tensor::zeros(n, h);
  for (double& v : t.data()) v = g(rng);
  return t;
}

std::vector<int> random_labels(std::size_t n, std::size_t num_labels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> y(0, static_cast<int>(num_labels) - 1);
  std::vector<int> out(n);
  for (int& v : out) v = y(rng);
  return out;
}

void zero_last_layer(diffmath::MLP& net) {
  auto& last = net.layers().back();
  for (double& v : last.weight.data()) v = 0.0;
  for (double& v : last.bias.data()) v = 0.0;
}

data::TabularSchema continuous_schema(std::size_t d, std::size_t classes = 2) {
  std::vector<data::Feature> f;
  for (std::size_t j = 0; j < d; ++j) {
    f.push_back({"x" + std::to_string(j), data::FeatureKind::kContinuous, {}, data::MinMax{0, 1}});
  }
  return data::TabularSchema(f, "y", classes);
}

double closed_form_kl(double mq, double vq, double mp, double vp) {
  return 0.5 * (std::log(vp / vq) + (vq + (mq - mp) * (mq - mp)) / vp - 1.0);
}

}  // namespace

TEST(Partition, UniformIsDisjointAndCovering) {
  const auto p = ClusterPartition::uniform(3, 4);
  EXPECT_EQ(p.num_clusters(), 12u);
  std::set<std::size_t> seen;
  for (int y = 0; y < 3; ++y) {
    EXPECT_EQ(p.clusters_of(y).size(), 4u);
    for (std::size_t c : p.clusters_of(y)) {
      EXPECT_TRUE(seen.insert(c).second);
      EXPECT_EQ(p.label_of(c), y);
    }
  }
  EXPECT_EQ(seen.size(), 12u);
  EXPECT_THROW(p.clusters_of(3), ValidationError);
  EXPECT_THROW(p.clusters_of(-1), ValidationError);
  const Tensor m = p.mask(std::vector<int>{1});
  for (std::size_t c = 0; c < 12; ++c) EXPECT_EQ(m[c], (c >= 4 && c < 8) ? 1.0 : 0.0);
}

TEST(Partition, RejectsOverlapAndGaps) {
  EXPECT_THROW(ClusterPartition({{0, 1}, {1}}, 2), ConfigError);
  EXPECT_THROW(ClusterPartition({{0}, {2}}, 3), ConfigError);
  EXPECT_THROW(ClusterPartition({{0, 1}, {}}, 2), ConfigError);
  EXPECT_NO_THROW(ClusterPartition({{2, 0}, {1}}, 3));
}

TEST(Model, ShapesFollowSchema) {
  const auto model = oracle::random_model(3);
  EXPECT_EQ(model.decoder.output_width(), model.input_width());
  EXPECT_EQ(model.prior.mean.rows(), model.partition.num_clusters());
  EXPECT_EQ(model.latent_mean_head.output_width(), model.latent_dim());
  EXPECT_FALSE(model.recourse_ready);
}

TEST(EncodeCluster, ZeroFinalLayerGivesUniformOverOwnClusters) {
  auto model = create_model(continuous_schema(3), LgmvaeConfig{4, 5, {16, 16}});
  zero_last_layer(model.cluster_head);
  const Tensor x = random_rows(model.schema, 6, 1);
  const std::vector<int> y{0, 1, 0, 1, 1, 0};
  const Tensor q = encode_cluster(model, x, y);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t c = 0; c < 10; ++c) {
      const bool own = model.partition.label_of(c) == y[i];
      EXPECT_NEAR(q(i, c), own ? 0.2 : 0.0, 1e-15);
    }
  }
  EXPECT_NEAR(elbo_terms(model, x, y, Tensor::zeros(6, 4)).kl_c, 0.0, 1e-15);
}

TEST(EncodeCluster, MassOnlyOnOwnClustersAcrossRandomModels) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto model = oracle::random_model(seed);
    const Tensor x = random_rows(model.schema, 20, seed + 1);
    const auto y = random_labels(20, 2, seed + 2);
    const Tensor q = encode_cluster(model, x, y);
    for (std::size_t i = 0; i < 20; ++i) {
      double inside = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) {
        if (model.partition.label_of(c) == y[i]) {
          inside += q(i, c);
        } else {
          ASSERT_EQ(q(i, c), 0.0);  // exactly zero, not merely small
        }
      }
      ASSERT_NEAR(inside, 1.0, 1e-9);
    }
  }
}

TEST(EncodeCluster, InvalidLabelThrows) {
  const auto model = oracle::random_model(1);
  const Tensor x = random_rows(model.schema, 1, 1);
  EXPECT_THROW(encode_cluster(model, x, std::vector<int>{2}), ValidationError);
  EXPECT_THROW(encode(model, x, std::vector<int>{-1}), ValidationError);
}

TEST(EncodeLatent, LogVarianceClampedAndDeterministic) {
  auto model = oracle::random_model(4);
  auto& bias = model.latent_logvar_head.layers().back().bias;
  for (std::size_t j = 0; j < bias.size(); ++j) bias.data()[j] = j % 2 == 0 ? 80.0 : -80.0;
  const Tensor x = random_rows(model.schema, 5, 2);
  const std::vector<int> y{0, 1, 1, 0, 1};
  const Tensor q = encode_cluster(model, x, y);
  const auto a = encode_latent(model, x, y, q);
  for (double v : a.logvar.data()) {
    EXPECT_GE(v, kLogVarMin);
    EXPECT_LE(v, kLogVarMax);
  }
  const auto b = encode_latent(model, x, y, q);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.logvar, b.logvar);
  EXPECT_THROW(encode_latent(model, x, y, Tensor::zeros(5, q.cols() + 1)), ShapeError);
}

TEST(Reparameterize, Examples) {
  const Tensor mu = Tensor::matrix(1, 3, {0.5, -1.0, 2.0});
  EXPECT_EQ(reparameterize(mu, Tensor::matrix(1, 3, {0.3, -2, 4}), Tensor::zeros(1, 3)), mu);
  const Tensor z = reparameterize(mu, Tensor::zeros(1, 3), Tensor::full(1, 3, 1.0));
  EXPECT_EQ(z, Tensor::matrix(1, 3, {1.5, 0.0, 3.0}));
  EXPECT_THROW(reparameterize(mu, Tensor::zeros(1, 2), Tensor::zeros(1, 3)), ShapeError);
}

TEST(Reparameterize, MonteCarloVarianceWithinTwoPercent) {
  const std::size_t n = 100000;
  const std::vector<double> logvars{-3.0, 0.0, 1.7};
  Tensor mu = Tensor::zeros(n, 3), lv = Tensor::zeros(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      mu.row_span(i)[j] = 0.25 * static_cast<double>(j);
      lv.row_span(i)[j] = logvars[j];
    }
  }
  const Tensor z = reparameterize(mu, lv, normal_noise(n, 3, 99));
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0, s = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += z(i, j);
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) s += (z(i, j) - m) * (z(i, j) - m);
    s /= static_cast<double>(n - 1);
    EXPECT_NEAR(s / std::exp(logvars[j]), 1.0, 0.02) << "dim " << j;
  }
}

TEST(Reparameterize, GradientFlowsToMeanAndLogVariance) {
  Tape t;
  Tensor m = Tensor::matrix(1, 2, {0.3, -0.2}), l = Tensor::matrix(1, 2, {0.1, -0.4});
  m.set_requires_grad(true);
  l.set_requires_grad(true);
  auto mv = t.leaf(m), lv = t.leaf(l);
  const Tensor eps = Tensor::matrix(1, 2, {0.7, -1.1});
  t.backward(diffmath::sum(reparameterize(mv, lv, eps)));
  EXPECT_EQ(mv.grad()[0], 1.0);
  EXPECT_NEAR(lv.grad()[1], 0.5 * std::exp(-0.2) * -1.1, 1e-15);
}

TEST(Decode, ContinuousOnlyInferenceEqualsTraining) {
  const auto model = create_model(continuous_schema(4), LgmvaeConfig{3, 2, {8, 8}});
  const Tensor z = normal_noise(7, 3, 5);
  EXPECT_EQ(decode(model, z, DecodeMode::kInference), decode(model, z, DecodeMode::kTraining));
  EXPECT_THROW(decode(model, normal_noise(1, 4, 1), DecodeMode::kInference), ShapeError);
}

TEST(Decode, RoundingAndRepairRule) {
  const data::TabularSchema schema(
      {{"a", data::FeatureKind::kContinuous, {}, data::MinMax{0, 1}},
       {"g", data::FeatureKind::kCategorical, {"p", "q", "r"}, std::nullopt}},
      "y", 2);
  Tensor rows = Tensor::matrix(4, 4, {0.3, 0.9, 0.2, 0.1,  //
                                      0.3, 0.6, 0.7, 0.1,  //
                                      0.3, 0.2, 0.1, 0.3,  //
                                      0.7, 0.1, 0.1, 0.8});
  round_categorical(rows, schema);
  EXPECT_EQ(rows, Tensor::matrix(4, 4, {0.3, 1, 0, 0,  //
                                        0.3, 0, 1, 0,  //
                                        0.3, 0, 0, 1,  //
                                        0.7, 0, 0, 1}));
}

TEST(Decode, InferenceRowsAreExactOneHot) {
  const auto model = oracle::random_model(8);
  const Tensor out = decode(model, normal_noise(50, model.latent_dim(), 3), DecodeMode::kInference);
  const auto group = model.schema.ohe_groups().front();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double s = 0.0;
    for (std::size_t c = group.begin; c < group.end; ++c) {
      EXPECT_TRUE(out(i, c) == 0.0 || out(i, c) == 1.0);
      s += out(i, c);
    }
    EXPECT_EQ(s, 1.0);
  }
}

TEST(Elbo, GaussianKlExampleAgainstMonteCarlo) {
  Tape t;
  const auto kl = diffmath::gaussian_kl_matrix(
      t.constant(Tensor::scalar(1.0)), t.constant(Tensor::scalar(0.0)),
      t.constant(Tensor::scalar(0.0)), t.constant(Tensor::scalar(0.0)));
  EXPECT_NEAR(kl.value()[0], 0.5, 1e-15);
  const double mc = oracle::monte_carlo_gaussian_kl(std::vector<double>{1.0}, std::vector<double>{1.0},
                                                    std::vector<double>{0.0}, std::vector<double>{1.0},
                                                    1000000, 17);
  EXPECT_LT(std::fabs(mc - 0.5) / 0.5, 0.01);
}

TEST(Elbo, GaussianKlRandomDrawsAgainstMonteCarlo) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> mean(-1.5, 1.5), logvar(-1.0, 1.0);
  for (int draw = 0; draw < 5; ++draw) {
    const std::size_t h = 3;
    std::vector<double> mq(h), vq(h), mp(h), vp(h);
    Tensor a = Tensor::zeros(1, h), b = Tensor::zeros(1, h), c = Tensor::zeros(1, h),
           d = Tensor::zeros(1, h);
    for (std::size_t j = 0; j < h; ++j) {
      a.data()[j] = mq[j] = mean(rng);
      b.data()[j] = logvar(rng);
      vq[j] = std::exp(b[j]);
      c.data()[j] = mp[j] = mean(rng);
      d.data()[j] = logvar(rng);
      vp[j] = std::exp(d[j]);
    }
    Tape t;
    const double closed = diffmath::gaussian_kl_matrix(t.constant(a), t.constant(b), t.constant(c),
                                                       t.constant(d))
                              .value()[0];
    const double mc = oracle::monte_carlo_gaussian_kl(mq, vq, mp, vp, 1000000, 100 + draw);
    EXPECT_LT(std::fabs(mc - closed) / closed, 0.01) << "draw " << draw << " closed " << closed;
  }
}

TEST(Elbo, PointMassOnOneOfFiveClustersGivesLogFive) {
  auto model = create_model(continuous_schema(2), LgmvaeConfig{2, 5, {8}});
  zero_last_layer(model.cluster_head);
  model.cluster_head.layers().back().bias.data()[2] = 1000.0;
  const Tensor x = random_rows(model.schema, 3, 4);
  const std::vector<int> y{0, 0, 0};
  const double kl_c = elbo_terms(model, x, y, Tensor::zeros(3, 2)).kl_c;
  const std::vector<double> p{0, 0, 1, 0, 0}, q(5, 0.2);
  EXPECT_NEAR(kl_c, oracle::categorical_kl(p, q), 1e-12);
  EXPECT_NEAR(kl_c, std::log(5.0), 1e-12);
}

TEST(Elbo, CategoricalKlMatchesDirectSum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = oracle::random_model(seed);
    const Tensor x = random_rows(model.schema, 16, seed);
    const auto y = random_labels(16, 2, seed + 9);
    const Tensor q = encode_cluster(model, x, y);
    double expected = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      const auto& own = model.partition.clusters_of(y[i]);
      std::vector<double> p, u(own.size(), 1.0 / static_cast<double>(own.size()));
      for (std::size_t c : own) p.push_back(q(i, c));
      expected += oracle::categorical_kl(p, u);
    }
    expected /= 16.0;
    const auto terms = elbo_terms(model, x, y, normal_noise(16, model.latent_dim(), seed));
    EXPECT_NEAR(terms.kl_c, expected, 1e-12);
  }
}

TEST(Elbo, GaussianTermIsResponsibilityWeighted) {
  const auto model = oracle::random_model(5);
  const Tensor x = random_rows(model.schema, 8, 1);
  const auto y = random_labels(8, 2, 2);
  const Tensor q = encode_cluster(model, x, y);
  const auto lat = encode_latent(model, x, y, q);
  double expected = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t c = 0; c < q.cols(); ++c) {
      double kl = 0.0;
      for (std::size_t j = 0; j < model.latent_dim(); ++j) {
        const double plv = std::clamp(model.prior.logvar(c, j), kLogVarMin, kLogVarMax);
        kl += closed_form_kl(lat.mean(i, j), std::exp(lat.logvar(i, j)), model.prior.mean(c, j),
                             std::exp(plv));
      }
      expected += q(i, c) * kl;
    }
  }
  expected /= 8.0;
  EXPECT_NEAR(elbo_terms(model, x, y, normal_noise(8, model.latent_dim(), 3)).kl_z, expected, 1e-10);
}

TEST(Elbo, TermsNonNegativeAndWeighted) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = oracle::random_model(seed);
    const Tensor x = random_rows(model.schema, 10, seed);
    const auto y = random_labels(10, 2, seed);
    const auto t = elbo_terms(model, x, y, normal_noise(10, model.latent_dim(), seed));
    EXPECT_GE(t.kl_c, -1e-15);
    EXPECT_GE(t.kl_z, 0.0);
    EXPECT_GE(t.recon, 0.0);
    const auto& w = model.config.weights;
    EXPECT_NEAR(t.loss, w.kl_c * t.kl_c + w.kl_z * t.kl_z + w.recon * t.recon, 1e-12);
  }
}

TEST(Elbo, NonFiniteTermThrows) {
  auto model = oracle::random_model(2);
  model.decoder.layers().back().bias.data()[0] = std::numeric_limits<double>::infinity();
  const Tensor x = random_rows(model.schema, 2, 1);
  EXPECT_THROW(elbo_terms(model, x, std::vector<int>{0, 1}, Tensor::zeros(2, model.latent_dim())),
               NumericError);
}

TEST(Elbo, GradientCheckOnHundredRandomModels) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto model = oracle::random_model(1000 + seed);
    const Tensor x = random_rows(model.schema, 6, seed);
    const auto y = random_labels(6, 2, seed);
    const Tensor noise = normal_noise(6, model.latent_dim(), seed);
    const double err = oracle::max_model_gradient_error(model, x, y, noise, 6, seed);
    worst = std::max(worst, err);
    EXPECT_LT(err, 1e-4) << "model seed " << 1000 + seed;
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Elbo, SingleLabelConfigurationWorks) {
  auto model = create_model(continuous_schema(3, 1), LgmvaeConfig{2, 4, {8}});
  EXPECT_EQ(model.partition.num_clusters(), 4u);
  const Tensor x = random_rows(model.schema, 5, 1);
  const std::vector<int> y(5, 0);
  const auto t = elbo_terms(model, x, y, normal_noise(5, 2, 1));
  EXPECT_TRUE(std::isfinite(t.loss));
  EXPECT_LT(oracle::max_model_gradient_error(model, x, y, normal_noise(5, 2, 1), 10, 3), 1e-4);
}

TEST(Centroids, OnePerOwnClusterAtPriorMean) {
  const auto model = create_model(continuous_schema(3), LgmvaeConfig{4, 5, {8}});
  const auto cs = centroids(model, 1);
  ASSERT_EQ(cs.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(cs[k].cluster, model.partition.clusters_of(1)[k]);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(cs[k].latent[j], model.prior.mean(cs[k].cluster, j));
    const Tensor dec = decode(model, Tensor::row(cs[k].latent), DecodeMode::kInference);
    EXPECT_EQ(std::vector<double>(dec.data().begin(), dec.data().end()), cs[k].decoded);
  }
  EXPECT_THROW(centroids(model, 2), ValidationError);
}

TEST(Sample, ClusterFrequenciesWithinThreeSigma) {
  const auto model = create_model(continuous_schema(2), LgmvaeConfig{2, 5, {8}});
  std::mt19937_64 rng(31);
  const std::size_t n = 10000;
  const auto s = sample_latent(model, 1, n, rng);
  ASSERT_EQ(s.clusters.size(), n);
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t c : s.clusters) ++counts[c];
  const double sigma = std::sqrt(n * 0.2 * 0.8);
  ASSERT_EQ(counts.size(), 5u);
  for (const auto& [c, k] : counts) {
    EXPECT_EQ(model.partition.label_of(c), 1);
    EXPECT_LT(std::fabs(static_cast<double>(k) - 0.2 * n), 3.0 * sigma) << "cluster " << c;
  }
}

TEST(Sample, SizeLabelsAndDeterminism) {
  const auto model = oracle::random_model(6);
  const auto a = sample(model, 1, 37, 5);
  EXPECT_EQ(a.size(), 37u);
  EXPECT_EQ(a.y_star, std::vector<int>(37, 1));
  EXPECT_EQ(a.predicted(), std::vector<int>(37, 1));
  EXPECT_EQ(sample(model, 1, 37, 5).X, a.X);
  const std::vector<std::size_t> counts{3, 4};
  const auto both = sample(model, counts, 2);
  EXPECT_EQ(both.size(), 7u);
  EXPECT_EQ(both.y_star, (std::vector<int>{0, 0, 0, 1, 1, 1, 1}));
}

TEST(Sample, CollapsedVarianceStaysAtCentroids) {
  auto model = create_model(continuous_schema(3), LgmvaeConfig{2, 3, {8}});
  for (double& v : model.prior.logvar.data()) v = -50.0;  // clamped to the floor
  std::mt19937_64 rng(2);
  const auto s = sample_latent(model, 0, 200, rng);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_LT(std::fabs(s.z(i, j) - model.prior.mean(s.clusters[i], j)), 6.0 * std::exp(-5.0));
    }
  }
  const auto cs = centroids(model, 0);
  const Tensor dec = decode(model, s.z, DecodeMode::kInference);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto& c = cs[s.clusters[i]];
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(dec(i, j), c.decoded[j], 0.1);
  }
}
