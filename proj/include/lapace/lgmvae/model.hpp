#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lapace/data/dataset.hpp"
#include "lapace/diffmath/mlp.hpp"
#include "lapace/diffmath/tape.hpp"

namespace lapace::lgmvae {

using diffmath::Tape;
using diffmath::Tensor;
using diffmath::Var;

// Log-variances of every Gaussian head are clamped to this range before use.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

// Disjoint assignment of the K mixture components to the L labels.
class ClusterPartition {
 public:
  ClusterPartition() = default;
  ClusterPartition(std::vector<std::vector<std::size_t>> clusters_by_label,
                   std::size_t num_clusters);

  // Label y owns clusters [y * per_label, (y + 1) * per_label).
  static ClusterPartition uniform(std::size_t num_labels, std::size_t clusters_per_label);

  std::size_t num_clusters() const { return owner_.size(); }
  std::size_t num_labels() const { return clusters_by_label_.size(); }
  const std::vector<std::size_t>& clusters_of(int label) const;
  int label_of(std::size_t cluster) const { return owner_.at(cluster); }
  const std::vector<std::vector<std::size_t>>& assignment() const { return clusters_by_label_; }

  // n x K indicator of c in C_{labels[i]}.
  Tensor mask(std::span<const int> labels) const;

  friend bool operator==(const ClusterPartition&, const ClusterPartition&) = default;

 private:
  std::vector<std::vector<std::size_t>> clusters_by_label_;
  std::vector<int> owner_;
};

// Learnable mixture prior p(z | c) = N(mean[c], exp(logvar[c])).
struct PriorTable {
  Tensor mean;    // K x h
  Tensor logvar;  // K x h
};

// Weights of the categorical KL, Gaussian KL and reconstruction terms.
struct LossWeights {
  double kl_c = 0.1;
  double kl_z = 0.1;
  double recon = 1.0;
};

struct LgmvaeConfig {
  std::size_t latent_dim = 8;
  std::size_t clusters_per_class = 5;
  std::vector<std::size_t> hidden{512, 512, 512};
  LossWeights weights;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 2000;
  std::size_t patience = 20;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct LgmvaeModel {
  data::TabularSchema schema;
  ClusterPartition partition;
  LgmvaeConfig config;
  diffmath::MLP cluster_head;        // [x, onehot(y)] -> K logits
  diffmath::MLP latent_trunk;        // [x, onehot(y), q(c|x,y)] -> hidden
  diffmath::MLP latent_mean_head;    // hidden -> h
  diffmath::MLP latent_logvar_head;  // hidden -> h
  diffmath::MLP decoder;             // h -> d (raw, pre-activation)
  PriorTable prior;
  bool recourse_ready = false;

  std::size_t latent_dim() const { return prior.mean.cols(); }
  std::size_t num_labels() const { return partition.num_labels(); }
  std::size_t input_width() const { return schema.encoded_width(); }

  // Fixed order: cluster head, latent trunk, mean head, logvar head,
  // decoder, prior mean, prior logvar.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

// Randomly initialised model for a fitted schema.
LgmvaeModel create_model(const data::TabularSchema& schema, const LgmvaeConfig& config);

// ---- graph building blocks ---------------------------------------------

struct BoundModel {
  diffmath::BoundMLP cluster_head;
  diffmath::BoundMLP latent_trunk;
  diffmath::BoundMLP latent_mean_head;
  diffmath::BoundMLP latent_logvar_head;
  diffmath::BoundMLP decoder;
  Var prior_mean;
  Var prior_logvar;
};

BoundModel bind(Tape& tape, const LgmvaeModel& model, bool trainable);
// Gradients in LgmvaeModel::parameters() order.
std::vector<Tensor> gradients(const BoundModel& bound);

struct LatentVars {
  Var mean;
  Var logvar;  // clamped
};

Tensor one_hot_labels(std::span<const int> labels, std::size_t num_labels);

Var cluster_probs(const BoundModel& m, Var x, Var y_onehot, const Tensor& mask);
LatentVars latent_params(const BoundModel& m, Var x, Var y_onehot, Var c_probs);
Var reparameterize(Var mean, Var logvar, const Tensor& noise);
// Decoder output before any activation.
Var decode_raw(const BoundModel& m, Var z);
// Linear continuous columns, sigmoid on one-hot columns.
Var decode_soft(const BoundModel& m, Var z, const std::vector<bool>& categorical);

struct ElboVars {
  Var kl_c;
  Var kl_z;
  Var recon;
  Var loss;  // weighted sum
};

ElboVars elbo_graph(const BoundModel& m, const LgmvaeModel& model, const Tensor& x,
                    std::span<const int> labels, const Tensor& noise);

// ---- tensor-level operations -------------------------------------------

enum class DecodeMode { kTraining, kInference };

struct LatentGaussian {
  Tensor mean;
  Tensor logvar;
};

struct ElboTerms {
  double kl_c = 0.0;
  double kl_z = 0.0;
  double recon = 0.0;
  double loss = 0.0;
};

// q(c | x, y): n x K, zero outside C_y, rows sum to one over C_y.
Tensor encode_cluster(const LgmvaeModel& model, const Tensor& x, std::span<const int> labels);
LatentGaussian encode_latent(const LgmvaeModel& model, const Tensor& x,
                             std::span<const int> labels, const Tensor& c_probs);
// Deterministic encoding: mean of q(z | x, c, y) with soft responsibilities.
Tensor encode(const LgmvaeModel& model, const Tensor& x, std::span<const int> labels);
Tensor reparameterize(const Tensor& mean, const Tensor& logvar, const Tensor& noise);
Tensor decode(const LgmvaeModel& model, const Tensor& z, DecodeMode mode);
// Rounds each one-hot group at 0.5; a group left with zero or several ones is
// replaced by the one-hot of its largest entry.
void round_categorical(Tensor& decoded, const data::TabularSchema& schema);
ElboTerms elbo_terms(const LgmvaeModel& model, const Tensor& x, std::span<const int> labels,
                     const Tensor& noise);

struct Centroid {
  std::size_t cluster = 0;
  std::vector<double> latent;
  std::vector<double> decoded;  // inference mode
};

std::vector<Centroid> centroids(const LgmvaeModel& model, int label);

struct LatentSample {
  std::vector<std::size_t> clusters;  // component of every draw
  Tensor z;                           // n x h
};

// c uniform over C_label, then z ~ p(z | c).
LatentSample sample_latent(const LgmvaeModel& model, int label, std::size_t n,
                           std::mt19937_64& rng);

// n synthetic rows of class `label`: c uniform over C_y, z ~ p(z | c),
// inference-mode decode. Labels (y_star and y_pred) are set to `label`.
data::Dataset sample(const LgmvaeModel& model, int label, std::size_t n, std::uint64_t seed);
// counts[y] rows of every label, concatenated in label order.
data::Dataset sample(const LgmvaeModel& model, std::span<const std::size_t> counts,
                     std::uint64_t seed);

}  // namespace lapace::lgmvae
