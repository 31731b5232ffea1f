#include "lapace/lgmvae/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lapace/diffmath/adam.hpp"
#include "lapace/error.hpp"
#include "lapace/seeding.hpp"

namespace lapace::lgmvae {

namespace {

Tensor gather_rows(const Tensor& X, std::span<const std::size_t> rows) {
  Tensor out = Tensor::zeros(rows.size(), X.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto src = X.row_span(rows[k]);
    std::copy(src.begin(), src.end(), out.row_span(k).begin());
  }
  return out;
}

Tensor normal_noise(std::size_t n, std::size_t h, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out = Tensor::zeros(n, h);
  for (double& v : out.data()) v = normal(rng);
  return out;
}

}  // namespace

TrainResult train(const data::Dataset& dataset, const LgmvaeConfig& config,
                  const EpochCallback& on_epoch) {
  const std::vector<int>& labels = dataset.predicted();
  if (dataset.size() < 2) throw ValidationError("lgmvae: need at least two training rows");
  if (config.batch_size == 0) throw ConfigError("lgmvae: batch size must be positive");
  if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0)) {
    throw ConfigError("lgmvae: validation_fraction must lie in (0, 1)");
  }
  if (!(config.learning_rate > 0.0)) throw ConfigError("lgmvae: learning rate must be positive");

  TrainResult result;
  result.model = create_model(dataset.schema, config);
  LgmvaeModel& model = result.model;

  const auto parts = data::split_indices(
      dataset.size(), {{1.0 - config.validation_fraction, config.validation_fraction},
                       derive_seed(config.seed, 0x21)});
  const std::vector<std::size_t>& train_rows = parts[0];
  const Tensor val_x = gather_rows(dataset.X, parts[1]);
  std::vector<int> val_y;
  for (std::size_t i : parts[1]) val_y.push_back(labels[i]);

  std::mt19937_64 rng(derive_seed(config.seed, 0x22));
  const Tensor val_noise = normal_noise(val_x.rows(), config.latent_dim, rng);
  auto validation_loss = [&] { return elbo_terms(model, val_x, val_y, val_noise).loss; };

  LgmvaeModel best = model;
  double best_loss = validation_loss();
  result.history.push_back({0, std::nan(""), best_loss});
  if (on_epoch) on_epoch(result.history.back());

  diffmath::AdamState adam;
  adam.config.learning_rate = config.learning_rate;
  std::vector<std::size_t> order = train_rows;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Tensor batch = gather_rows(dataset.X, rows);
      std::vector<int> batch_y;
      for (std::size_t i : rows) batch_y.push_back(labels[i]);
      const Tensor noise = normal_noise(rows.size(), config.latent_dim, rng);

      Tape tape;
      const BoundModel bound = bind(tape, model, true);
      const ElboVars terms = elbo_graph(bound, model, batch, batch_y, noise);
      const double loss = terms.loss.value()[0];
      if (!std::isfinite(loss)) {
        throw NumericError("lgmvae: non-finite loss at epoch " + std::to_string(epoch) +
                           " (kl_c=" + std::to_string(terms.kl_c.value()[0]) +
                           ", kl_z=" + std::to_string(terms.kl_z.value()[0]) +
                           ", recon=" + std::to_string(terms.recon.value()[0]) + ")");
      }
      tape.backward(terms.loss);
      const std::vector<Tensor> grads = gradients(bound);
      auto params = model.parameters();
      diffmath::adam_step(params, grads, adam);
      loss_sum += loss;
      ++batches;
    }

    const double val = validation_loss();
    result.history.push_back({epoch, loss_sum / static_cast<double>(batches), val});
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(result.history.back());
    if (val < best_loss) {
      best_loss = val;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model = std::move(best);
  return result;
}

std::vector<CentroidCheck> check_centroids(const LgmvaeModel& model,
                                           const classifiers::Classifier& classifier) {
  std::vector<CentroidCheck> out;
  for (std::size_t y = 0; y < model.num_labels(); ++y) {
    for (const Centroid& c : centroids(model, static_cast<int>(y))) {
      out.push_back({c.cluster, static_cast<int>(y), classifier.predict(c.decoded)});
    }
  }
  return out;
}

double centroid_accuracy(const LgmvaeModel& model, const classifiers::Classifier& classifier) {
  const auto checks = check_centroids(model, classifier);
  const auto ok = std::count_if(checks.begin(), checks.end(), [](const auto& c) { return c.ok(); });
  return static_cast<double>(ok) / static_cast<double>(checks.size());
}

std::vector<CentroidCheck> validate_centroids(LgmvaeModel& model,
                                              const classifiers::Classifier& classifier) {
  std::vector<CentroidCheck> failing;
  for (const auto& c : check_centroids(model, classifier)) {
    if (!c.ok()) failing.push_back(c);
  }
  model.recourse_ready = failing.empty();
  return failing;
}

}  // namespace lapace::lgmvae
