#include "lapace/recourse/lapace.hpp"

#include <algorithm>
#include <cmath>

#include "lapace/error.hpp"

namespace lapace::recourse {

namespace dm = diffmath;

TauGrid::TauGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw ConfigError("tau grid needs at least two steps");
  if (values_.front() != 0.0 || values_.back() != 1.0) {
    throw ConfigError("tau grid must start at exactly 0 and end at exactly 1");
  }
  for (std::size_t i = 1; i < values_.size(); ++i) {
    if (!(values_[i] > values_[i - 1])) throw ConfigError("tau grid must be strictly increasing");
  }
}

TauGrid TauGrid::uniform(std::size_t steps) {
  if (steps < 2) throw ConfigError("tau grid needs at least two steps");
  std::vector<double> v(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    v[i] = static_cast<double>(i) / static_cast<double>(steps - 1);
  }
  return TauGrid(std::move(v));
}

std::vector<double> interpolate(std::span<const double> z_x, std::span<const double> z_c,
                                double tau) {
  if (z_x.size() != z_c.size()) throw ShapeError("interpolate: latent widths differ");
  std::vector<double> z(z_x.size());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = (1.0 - tau) * z_x[j] + tau * z_c[j];
  return z;
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kFirst:
      return "first";
    case Variant::kMiddle:
      return "middle";
    case Variant::kLast:
      return "last";
  }
  return "?";
}

const PathEntry& pick(const CESelection& s, Variant v) {
  switch (v) {
    case Variant::kFirst:
      return s.first;
    case Variant::kMiddle:
      return s.middle;
    case Variant::kLast:
      return s.last;
  }
  return s.last;
}

namespace {

Tensor rows_tensor(const std::vector<std::vector<double>>& rows, std::size_t width) {
  Tensor t = Tensor::zeros(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) throw ShapeError("row width mismatch");
    std::copy(rows[i].begin(), rows[i].end(), t.row_span(i).begin());
  }
  return t;
}

std::vector<double> row_vector(const Tensor& t, std::size_t r) {
  const auto s = t.row_span(r);
  return {s.begin(), s.end()};
}

void check_request(const lgmvae::LgmvaeModel& model, const classifiers::Classifier& classifier,
                   std::span<const double> x, int target) {
  if (!model.recourse_ready) throw ValidationError("model is not recourse-ready");
  if (x.size() != model.input_width()) {
    throw ShapeError("input has " + std::to_string(x.size()) + " encoded columns, model expects " +
                     std::to_string(model.input_width()));
  }
  model.partition.clusters_of(target);
  const int current = classifier.predict(x);
  if (current == target) {
    throw ValidationError("input is already classified as target " + std::to_string(target));
  }
}

// Penalty of the soft decode of z and its gradient with respect to z.
std::pair<double, std::vector<double>> penalty_and_grad(const lgmvae::LgmvaeModel& model,
                                                        const std::vector<double>& z,
                                                        const ConstraintSet& constraints) {
  dm::Tape tape;
  lgmvae::BoundModel bound;
  bound.decoder = model.decoder.bind(tape, false);
  Tensor zt = Tensor::row(z);
  zt.set_requires_grad(true);
  Var zv = tape.leaf(std::move(zt));
  Var g = dm::sum(constraints.penalty(
      lgmvae::decode_soft(bound, zv, model.schema.categorical_columns())));
  tape.backward(g);
  std::vector<double> grad(zv.grad().data().begin(), zv.grad().data().end());
  const double value = g.value()[0];
  if (!std::isfinite(value) ||
      !std::all_of(grad.begin(), grad.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericError("constraint correction: non-finite penalty or gradient");
  }
  return {value, std::move(grad)};
}

}  // namespace

CorrectionResult correct_latent(const lgmvae::LgmvaeModel& model, std::span<const double> z,
                                const ConstraintSet& constraints, const CorrectionConfig& config) {
  if (z.size() != model.latent_dim()) throw ShapeError("correct_latent: latent width mismatch");
  if (!(config.learning_rate >= 0.0)) throw ConfigError("correction learning rate must be >= 0");
  CorrectionResult out{{z.begin(), z.end()}, 0, 0.0};
  if (constraints.empty()) return out;

  auto [g, grad] = penalty_and_grad(model, out.latent, constraints);
  double eta = config.learning_rate;
  while (g > kSatisfiedTolerance && out.iterations < config.max_iterations) {
    ++out.iterations;
    std::vector<double> candidate = out.latent;
    for (std::size_t j = 0; j < candidate.size(); ++j) candidate[j] -= eta * grad[j];
    auto [g_new, grad_new] = penalty_and_grad(model, candidate, constraints);
    if (g_new <= g) {
      out.latent = std::move(candidate);
      g = g_new;
      grad = std::move(grad_new);
    } else {
      eta *= 0.5;
    }
  }
  out.penalty = g;
  return out;
}

std::vector<double> encode_input(const lgmvae::LgmvaeModel& model, std::span<const double> x,
                                 int label) {
  const int labels[] = {label};
  return row_vector(lgmvae::encode(model, Tensor::row(x), labels), 0);
}

std::vector<LatentPath> generate_paths(const lgmvae::LgmvaeModel& model,
                                       const classifiers::Classifier& classifier,
                                       std::span<const double> x, int target,
                                       const TauGrid& grid) {
  check_request(model, classifier, x, target);
  const std::vector<double> z_x = encode_input(model, x, classifier.predict(x));
  std::vector<LatentPath> paths;
  for (const std::size_t c : model.partition.clusters_of(target)) {
    const auto z_c = model.prior.mean.row_span(c);
    std::vector<std::vector<double>> latents;
    for (double tau : grid.values()) latents.push_back(interpolate(z_x, z_c, tau));
    const Tensor decoded = lgmvae::decode(model, rows_tensor(latents, model.latent_dim()),
                                          lgmvae::DecodeMode::kInference);
    const std::vector<int> labels = classifier.predict_batch(decoded);
    LatentPath path;
    path.cluster = c;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      path.entries.push_back(
          {grid.values()[i], std::move(latents[i]), row_vector(decoded, i), labels[i], 0, true});
    }
    path.flagged = path.entries.back().label != target;
    paths.push_back(std::move(path));
  }
  return paths;
}

std::vector<LatentPath> generate_constrained_paths(const lgmvae::LgmvaeModel& model,
                                                   const classifiers::Classifier& classifier,
                                                   std::span<const double> x, int target,
                                                   const TauGrid& grid,
                                                   const ConstraintSet& constraints,
                                                   const CorrectionConfig& config) {
  if (constraints.empty()) return generate_paths(model, classifier, x, target, grid);
  check_request(model, classifier, x, target);
  const std::vector<double> z_x = encode_input(model, x, classifier.predict(x));
  std::vector<LatentPath> paths;
  for (const std::size_t c : model.partition.clusters_of(target)) {
    const auto z_c = model.prior.mean.row_span(c);
    std::vector<std::vector<double>> latents;
    std::vector<std::size_t> counts;
    for (double tau : grid.values()) {
      CorrectionResult r = correct_latent(model, interpolate(z_x, z_c, tau), constraints, config);
      latents.push_back(std::move(r.latent));
      counts.push_back(r.iterations);
    }
    const Tensor decoded = lgmvae::decode(model, rows_tensor(latents, model.latent_dim()),
                                          lgmvae::DecodeMode::kInference);
    const std::vector<int> labels = classifier.predict_batch(decoded);
    LatentPath path;
    path.cluster = c;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::vector<double> row = row_vector(decoded, i);
      const bool ok = constraints.satisfied(row);
      path.entries.push_back(
          {grid.values()[i], std::move(latents[i]), std::move(row), labels[i], counts[i], ok});
    }
    path.flagged = path.entries.back().label != target;
    paths.push_back(std::move(path));
  }
  return paths;
}

std::vector<LatentPath> generate_naive_paths(const lgmvae::LgmvaeModel& model,
                                             const classifiers::Classifier& classifier,
                                             std::span<const double> x, int target,
                                             const TauGrid& grid,
                                             const ConstraintSet& constraints) {
  auto paths = generate_paths(model, classifier, x, target, grid);
  if (constraints.empty()) return paths;
  for (auto& path : paths) {
    for (auto& e : path.entries) {
      e.decoded = constraints.clamp(e.decoded);
      e.label = classifier.predict(e.decoded);
      e.satisfied = constraints.satisfied(e.decoded);
    }
    path.flagged = path.entries.back().label != target;
  }
  return paths;
}

CESelection select_points(const lgmvae::LgmvaeModel& model,
                          const classifiers::Classifier& classifier, const LatentPath& path,
                          int target) {
  if (path.entries.empty()) throw ValidationError("select_points: empty path");
  const auto first = std::find_if(path.entries.begin(), path.entries.end(),
                                  [&](const PathEntry& e) { return e.label == target; });
  if (first == path.entries.end()) {
    throw ValidationError("no entry of the path to cluster " + std::to_string(path.cluster) +
                          " is classified as target " + std::to_string(target));
  }
  CESelection s;
  s.first = *first;
  s.last = path.entries.back();
  s.middle.tau = 0.5 * (s.first.tau + s.last.tau);
  s.middle.latent.resize(s.first.latent.size());
  for (std::size_t j = 0; j < s.middle.latent.size(); ++j) {
    s.middle.latent[j] = 0.5 * (s.first.latent[j] + s.last.latent[j]);
  }
  s.middle.decoded = row_vector(
      lgmvae::decode(model, Tensor::row(s.middle.latent), lgmvae::DecodeMode::kInference), 0);
  s.middle.label = classifier.predict(s.middle.decoded);
  return s;
}

std::vector<CESelection> select_all(const lgmvae::LgmvaeModel& model,
                                    const classifiers::Classifier& classifier,
                                    const std::vector<LatentPath>& paths, int target) {
  std::vector<CESelection> out;
  for (const auto& p : paths) out.push_back(select_points(model, classifier, p, target));
  return out;
}

bool actionable(const std::vector<LatentPath>& paths, int target) {
  for (const auto& p : paths) {
    for (const auto& e : p.entries) {
      if (e.label == target && e.satisfied) return true;
    }
  }
  return false;
}

}  // namespace lapace::recourse
