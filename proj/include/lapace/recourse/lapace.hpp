#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lapace/classifiers/classifier.hpp"
#include "lapace/lgmvae/model.hpp"
#include "lapace/recourse/constraints.hpp"

namespace lapace::recourse {

// Interpolation weights, strictly increasing from exactly 0 to exactly 1.
class TauGrid {
 public:
  explicit TauGrid(std::vector<double> values);
  static TauGrid uniform(std::size_t steps = 21);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

// (1 - tau) * z_x + tau * z_c, elementwise.
std::vector<double> interpolate(std::span<const double> z_x, std::span<const double> z_c,
                                double tau);

struct PathEntry {
  double tau = 0.0;
  std::vector<double> latent;
  std::vector<double> decoded;  // encoded space, inference mode
  int label = 0;
  std::size_t corrections = 0;
  bool satisfied = true;  // constraints hold on `decoded`
};

struct LatentPath {
  std::size_t cluster = 0;
  std::vector<PathEntry> entries;
  // The tau = 1 entry is not classified as the target.
  bool flagged = false;
};

struct CESelection {
  PathEntry first;
  PathEntry middle;
  PathEntry last;
};

enum class Variant { kFirst, kMiddle, kLast };
const char* to_string(Variant v);
const PathEntry& pick(const CESelection& s, Variant v);

struct CorrectionConfig {
  double learning_rate = 0.05;
  std::size_t max_iterations = 50;
};

struct CorrectionResult {
  std::vector<double> latent;
  std::size_t iterations = 0;
  double penalty = 0.0;
  bool satisfied() const { return penalty <= kSatisfiedTolerance; }
};

// Gradient descent on g(decode(z)) through the pre-rounding decoder. A step
// that raises g is rejected and the step size halved; every attempt counts
// towards max_iterations.
CorrectionResult correct_latent(const lgmvae::LgmvaeModel& model, std::span<const double> z,
                                const ConstraintSet& constraints, const CorrectionConfig& config);

// Deterministic encoding of one row.
std::vector<double> encode_input(const lgmvae::LgmvaeModel& model, std::span<const double> x,
                                 int label);

// One path per target cluster, ordered by cluster id.
std::vector<LatentPath> generate_paths(const lgmvae::LgmvaeModel& model,
                                       const classifiers::Classifier& classifier,
                                       std::span<const double> x, int target,
                                       const TauGrid& grid);

std::vector<LatentPath> generate_constrained_paths(const lgmvae::LgmvaeModel& model,
                                                   const classifiers::Classifier& classifier,
                                                   std::span<const double> x, int target,
                                                   const TauGrid& grid,
                                                   const ConstraintSet& constraints,
                                                   const CorrectionConfig& config = {});

// Unconstrained paths whose decoded entries are clamped into the constraint
// set afterwards and relabelled.
std::vector<LatentPath> generate_naive_paths(const lgmvae::LgmvaeModel& model,
                                             const classifiers::Classifier& classifier,
                                             std::span<const double> x, int target,
                                             const TauGrid& grid,
                                             const ConstraintSet& constraints);

CESelection select_points(const lgmvae::LgmvaeModel& model,
                          const classifiers::Classifier& classifier, const LatentPath& path,
                          int target);

std::vector<CESelection> select_all(const lgmvae::LgmvaeModel& model,
                                    const classifiers::Classifier& classifier,
                                    const std::vector<LatentPath>& paths, int target);

// True when some entry of some path is classified as the target and meets
// every constraint.
bool actionable(const std::vector<LatentPath>& paths, int target);

}  // namespace lapace::recourse
