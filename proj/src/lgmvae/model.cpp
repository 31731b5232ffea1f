#include "lapace/lgmvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "lapace/error.hpp"
#include "lapace/seeding.hpp"

namespace lapace::lgmvae {

namespace dm = diffmath;

// ---- ClusterPartition ----------------------------------------------------

ClusterPartition::ClusterPartition(std::vector<std::vector<std::size_t>> clusters_by_label,
                                   std::size_t num_clusters)
    : clusters_by_label_(std::move(clusters_by_label)), owner_(num_clusters, -1) {
  for (std::size_t y = 0; y < clusters_by_label_.size(); ++y) {
    if (clusters_by_label_[y].empty()) {
      throw ConfigError("partition: label " + std::to_string(y) + " owns no cluster");
    }
    for (std::size_t c : clusters_by_label_[y]) {
      if (c >= num_clusters) throw ConfigError("partition: cluster id out of range");
      if (owner_[c] != -1) {
        throw ConfigError("partition: cluster " + std::to_string(c) + " assigned twice");
      }
      owner_[c] = static_cast<int>(y);
    }
  }
  for (std::size_t c = 0; c < num_clusters; ++c) {
    if (owner_[c] == -1) throw ConfigError("partition: cluster " + std::to_string(c) + " unassigned");
  }
}

ClusterPartition ClusterPartition::uniform(std::size_t num_labels, std::size_t clusters_per_label) {
  if (num_labels == 0 || clusters_per_label == 0) {
    throw ConfigError("partition: need at least one label and one cluster per label");
  }
  std::vector<std::vector<std::size_t>> by_label(num_labels);
  for (std::size_t y = 0; y < num_labels; ++y) {
    for (std::size_t k = 0; k < clusters_per_label; ++k) {
      by_label[y].push_back(y * clusters_per_label + k);
    }
  }
  return ClusterPartition(std::move(by_label), num_labels * clusters_per_label);
}

const std::vector<std::size_t>& ClusterPartition::clusters_of(int label) const {
  if (label < 0 || static_cast<std::size_t>(label) >= clusters_by_label_.size()) {
    throw ValidationError("invalid label " + std::to_string(label) + " (model has " +
                          std::to_string(clusters_by_label_.size()) + " labels)");
  }
  return clusters_by_label_[static_cast<std::size_t>(label)];
}

Tensor ClusterPartition::mask(std::span<const int> labels) const {
  Tensor out = Tensor::zeros(labels.size(), num_clusters());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t c : clusters_of(labels[i])) out(i, c) = 1.0;
  }
  return out;
}

// ---- model ---------------------------------------------------------------

std::vector<Tensor*> LgmvaeModel::parameters() {
  std::vector<Tensor*> out;
  for (dm::MLP* net : {&cluster_head, &latent_trunk, &latent_mean_head, &latent_logvar_head,
                       &decoder}) {
    for (Tensor* p : net->parameters()) out.push_back(p);
  }
  out.push_back(&prior.mean);
  out.push_back(&prior.logvar);
  return out;
}

std::vector<const Tensor*> LgmvaeModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const dm::MLP* net : {&cluster_head, &latent_trunk, &latent_mean_head,
                             &latent_logvar_head, &decoder}) {
    for (const Tensor* p : net->parameters()) out.push_back(p);
  }
  out.push_back(&prior.mean);
  out.push_back(&prior.logvar);
  return out;
}

LgmvaeModel create_model(const data::TabularSchema& schema, const LgmvaeConfig& config) {
  if (config.hidden.empty()) throw ConfigError("lgmvae: at least one hidden layer is required");
  if (config.latent_dim == 0) throw ConfigError("lgmvae: latent_dim must be positive");
  const std::size_t d = schema.encoded_width();
  const std::size_t labels = schema.num_classes();

  LgmvaeModel m;
  m.schema = schema;
  m.config = config;
  m.partition = ClusterPartition::uniform(labels, config.clusters_per_class);
  const std::size_t k = m.partition.num_clusters();
  const std::size_t h = config.latent_dim;

  std::mt19937_64 rng(derive_seed(config.seed, 0x11));
  const std::vector<std::size_t> inner(config.hidden.begin(), config.hidden.end() - 1);
  const std::size_t top = config.hidden.back();
  m.cluster_head = dm::MLP::make(d + labels, config.hidden, k, dm::Activation::kRelu,
                                 dm::Activation::kLinear, rng);
  m.latent_trunk = dm::MLP::make(d + labels + k, inner, top, dm::Activation::kRelu,
                                 dm::Activation::kRelu, rng);
  m.latent_mean_head = dm::MLP::make(top, {}, h, dm::Activation::kLinear, dm::Activation::kLinear, rng);
  m.latent_logvar_head =
      dm::MLP::make(top, {}, h, dm::Activation::kLinear, dm::Activation::kLinear, rng);
  m.decoder = dm::MLP::make(h, config.hidden, d, dm::Activation::kRelu, dm::Activation::kLinear, rng);

  m.prior.mean = Tensor::zeros(k, h);
  m.prior.logvar = Tensor::zeros(k, h);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (double& v : m.prior.mean.data()) v = normal(rng);
  return m;
}

BoundModel bind(Tape& tape, const LgmvaeModel& model, bool trainable) {
  BoundModel b;
  b.cluster_head = model.cluster_head.bind(tape, trainable);
  b.latent_trunk = model.latent_trunk.bind(tape, trainable);
  b.latent_mean_head = model.latent_mean_head.bind(tape, trainable);
  b.latent_logvar_head = model.latent_logvar_head.bind(tape, trainable);
  b.decoder = model.decoder.bind(tape, trainable);
  Tensor pm = model.prior.mean;
  Tensor pl = model.prior.logvar;
  pm.set_requires_grad(trainable);
  pl.set_requires_grad(trainable);
  b.prior_mean = tape.leaf(std::move(pm));
  b.prior_logvar = tape.leaf(std::move(pl));
  return b;
}

std::vector<Tensor> gradients(const BoundModel& bound) {
  std::vector<Tensor> out;
  for (const dm::BoundMLP* net : {&bound.cluster_head, &bound.latent_trunk,
                                  &bound.latent_mean_head, &bound.latent_logvar_head,
                                  &bound.decoder}) {
    for (auto& g : dm::gradients(*net)) out.push_back(std::move(g));
  }
  out.push_back(bound.prior_mean.grad());
  out.push_back(bound.prior_logvar.grad());
  return out;
}

Tensor one_hot_labels(std::span<const int> labels, std::size_t num_labels) {
  Tensor out = Tensor::zeros(labels.size(), num_labels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_labels) {
      throw ValidationError("invalid label " + std::to_string(labels[i]));
    }
    out(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

// ---- graph ---------------------------------------------------------------

Var cluster_probs(const BoundModel& m, Var x, Var y_onehot, const Tensor& mask) {
  Var logits = dm::forward(m.cluster_head, dm::concat_cols({x, y_onehot}));
  return dm::masked_softmax_rows(logits, mask);
}

LatentVars latent_params(const BoundModel& m, Var x, Var y_onehot, Var c_probs) {
  Var hidden = dm::forward(m.latent_trunk, dm::concat_cols({x, y_onehot, c_probs}));
  Var mean = dm::forward(m.latent_mean_head, hidden);
  Var logvar = dm::clamp(dm::forward(m.latent_logvar_head, hidden), kLogVarMin, kLogVarMax);
  return {mean, logvar};
}

Var reparameterize(Var mean, Var logvar, const Tensor& noise) {
  if (!mean.value().same_shape(noise) || !logvar.value().same_shape(noise)) {
    throw ShapeError("reparameterize: noise " + noise.shape_string() + " vs mean " +
                     mean.value().shape_string());
  }
  Var sd = dm::exp(dm::scale(logvar, 0.5));
  return dm::add(mean, dm::mul(sd, mean.tape().constant(noise)));
}

Var decode_raw(const BoundModel& m, Var z) { return dm::forward(m.decoder, z); }

Var decode_soft(const BoundModel& m, Var z, const std::vector<bool>& categorical) {
  Var raw = decode_raw(m, z);
  if (std::none_of(categorical.begin(), categorical.end(), [](bool b) { return b; })) return raw;
  const std::size_t n = raw.value().rows(), d = raw.value().cols();
  Tensor cat = Tensor::zeros(n, d), cont = Tensor::zeros(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) (categorical[j] ? cat : cont)(i, j) = 1.0;
  }
  Tape& t = raw.tape();
  return dm::add(dm::mul(raw, t.constant(std::move(cont))),
                 dm::mul(dm::sigmoid(raw), t.constant(std::move(cat))));
}

ElboVars elbo_graph(const BoundModel& m, const LgmvaeModel& model, const Tensor& x,
                    std::span<const int> labels, const Tensor& noise) {
  if (x.rows() == 0) throw ShapeError("elbo: empty batch");
  if (x.cols() != model.input_width()) {
    throw ShapeError("elbo: batch width " + std::to_string(x.cols()) + ", model expects " +
                     std::to_string(model.input_width()));
  }
  Tape& tape = m.prior_mean.tape();
  const Tensor mask = model.partition.mask(labels);
  Var xv = tape.constant(x);
  Var yv = tape.constant(one_hot_labels(labels, model.num_labels()));

  Var q = cluster_probs(m, xv, yv, mask);
  // KL(q(c|x,y) || uniform over C_y) = sum_c q log q + log |C_y|.
  Tensor log_sizes = Tensor::zeros(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    log_sizes[i] = std::log(static_cast<double>(model.partition.clusters_of(labels[i]).size()));
  }
  Var kl_c = dm::mean(dm::add(dm::row_sum(dm::xlogx(q)), tape.constant(std::move(log_sizes))));

  LatentVars lat = latent_params(m, xv, yv, q);
  Var kl_matrix = dm::gaussian_kl_matrix(
      lat.mean, lat.logvar, m.prior_mean, dm::clamp(m.prior_logvar, kLogVarMin, kLogVarMax));
  Var kl_z = dm::mean(dm::row_sum(dm::mul(q, kl_matrix)));

  Var z = reparameterize(lat.mean, lat.logvar, noise);
  Var recon = dm::mean(dm::mixed_reconstruction(decode_raw(m, z), x, model.schema.categorical_columns()));

  const LossWeights& w = model.config.weights;
  Var loss = dm::add(dm::add(dm::scale(kl_c, w.kl_c), dm::scale(kl_z, w.kl_z)),
                     dm::scale(recon, w.recon));
  return {kl_c, kl_z, recon, loss};
}

// ---- tensor-level --------------------------------------------------------

Tensor encode_cluster(const LgmvaeModel& model, const Tensor& x, std::span<const int> labels) {
  if (x.cols() != model.input_width()) throw ShapeError("encode_cluster: width mismatch");
  if (x.rows() != labels.size()) throw ShapeError("encode_cluster: label count mismatch");
  Tape tape;
  const BoundModel b = bind(tape, model, false);
  return cluster_probs(b, tape.constant(x),
                       tape.constant(one_hot_labels(labels, model.num_labels())),
                       model.partition.mask(labels))
      .value();
}

LatentGaussian encode_latent(const LgmvaeModel& model, const Tensor& x,
                             std::span<const int> labels, const Tensor& c_probs) {
  if (x.cols() != model.input_width() || x.rows() != labels.size() ||
      c_probs.rows() != x.rows() || c_probs.cols() != model.partition.num_clusters()) {
    throw ShapeError("encode_latent: shape mismatch");
  }
  Tape tape;
  const BoundModel b = bind(tape, model, false);
  const LatentVars lat = latent_params(b, tape.constant(x),
                                       tape.constant(one_hot_labels(labels, model.num_labels())),
                                       tape.constant(c_probs));
  return {lat.mean.value(), lat.logvar.value()};
}

Tensor encode(const LgmvaeModel& model, const Tensor& x, std::span<const int> labels) {
  return encode_latent(model, x, labels, encode_cluster(model, x, labels)).mean;
}

Tensor reparameterize(const Tensor& mean, const Tensor& logvar, const Tensor& noise) {
  Tape tape;
  return reparameterize(tape.constant(mean), tape.constant(logvar), noise).value();
}

void round_categorical(Tensor& decoded, const data::TabularSchema& schema) {
  for (const auto& group : schema.ohe_groups()) {
    for (std::size_t i = 0; i < decoded.rows(); ++i) {
      std::size_t ones = 0, best = group.begin;
      for (std::size_t c = group.begin; c < group.end; ++c) {
        if (decoded(i, c) > decoded(i, best)) best = c;
        ones += decoded(i, c) >= 0.5;
      }
      for (std::size_t c = group.begin; c < group.end; ++c) {
        decoded(i, c) = ones == 1 ? (decoded(i, c) >= 0.5 ? 1.0 : 0.0) : (c == best ? 1.0 : 0.0);
      }
    }
  }
}

Tensor decode(const LgmvaeModel& model, const Tensor& z, DecodeMode mode) {
  if (z.cols() != model.latent_dim()) {
    throw ShapeError("decode: latent width " + std::to_string(z.cols()) + ", model has " +
                     std::to_string(model.latent_dim()));
  }
  Tape tape;
  const BoundModel b = bind(tape, model, false);
  Tensor out = decode_soft(b, tape.constant(z), model.schema.categorical_columns()).value();
  if (mode == DecodeMode::kInference) round_categorical(out, model.schema);
  return out;
}

ElboTerms elbo_terms(const LgmvaeModel& model, const Tensor& x, std::span<const int> labels,
                     const Tensor& noise) {
  Tape tape;
  const BoundModel b = bind(tape, model, false);
  const ElboVars v = elbo_graph(b, model, x, labels, noise);
  ElboTerms t{v.kl_c.value()[0], v.kl_z.value()[0], v.recon.value()[0], v.loss.value()[0]};
  if (!std::isfinite(t.kl_c) || !std::isfinite(t.kl_z) || !std::isfinite(t.recon)) {
    throw NumericError("elbo: non-finite term");
  }
  return t;
}

std::vector<Centroid> centroids(const LgmvaeModel& model, int label) {
  const auto& clusters = model.partition.clusters_of(label);
  const std::size_t h = model.latent_dim();
  Tensor z = Tensor::zeros(clusters.size(), h);
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto src = model.prior.mean.row_span(clusters[k]);
    std::copy(src.begin(), src.end(), z.row_span(k).begin());
  }
  const Tensor decoded = decode(model, z, DecodeMode::kInference);
  std::vector<Centroid> out;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto zr = z.row_span(k);
    const auto xr = decoded.row_span(k);
    out.push_back({clusters[k], {zr.begin(), zr.end()}, {xr.begin(), xr.end()}});
  }
  return out;
}

LatentSample sample_latent(const LgmvaeModel& model, int label, std::size_t n,
                           std::mt19937_64& rng) {
  const auto& clusters = model.partition.clusters_of(label);
  const std::size_t h = model.latent_dim();
  std::uniform_int_distribution<std::size_t> pick(0, clusters.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentSample out{{}, Tensor::zeros(n, h)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = clusters[pick(rng)];
    out.clusters.push_back(c);
    for (std::size_t j = 0; j < h; ++j) {
      const double lv = std::clamp(model.prior.logvar(c, j), kLogVarMin, kLogVarMax);
      out.z(i, j) = model.prior.mean(c, j) + std::exp(0.5 * lv) * normal(rng);
    }
  }
  return out;
}

namespace {

void sample_into(const LgmvaeModel& model, int label, std::size_t n, std::mt19937_64& rng,
                 data::Dataset& out) {
  const Tensor z = sample_latent(model, label, n, rng).z;
  const Tensor x = decode(model, z, DecodeMode::kInference);
  const std::size_t offset = out.X.rows();
  Tensor merged = Tensor::zeros(offset + n, model.input_width());
  std::copy(out.X.data().begin(), out.X.data().end(), merged.data().begin());
  std::copy(x.data().begin(), x.data().end(), merged.data().begin() + static_cast<std::ptrdiff_t>(offset * model.input_width()));
  out.X = std::move(merged);
  out.y_star.insert(out.y_star.end(), n, label);
  out.y_pred->insert(out.y_pred->end(), n, label);
}

}  // namespace

data::Dataset sample(const LgmvaeModel& model, int label, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample: n must be >= 1");
  std::mt19937_64 rng(seed);
  data::Dataset out;
  out.schema = model.schema;
  out.X = Tensor::zeros(0, model.input_width());
  out.y_pred.emplace();
  sample_into(model, label, n, rng, out);
  return out;
}

data::Dataset sample(const LgmvaeModel& model, std::span<const std::size_t> counts,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  data::Dataset out;
  out.schema = model.schema;
  out.X = Tensor::zeros(0, model.input_width());
  out.y_pred.emplace();
  for (std::size_t y = 0; y < counts.size(); ++y) {
    if (counts[y] > 0) sample_into(model, static_cast<int>(y), counts[y], rng, out);
  }
  return out;
}

}  // namespace lapace::lgmvae
