#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lapace/classifiers/retrain_pool.hpp"
#include "lapace/data/dataset.hpp"
#include "lapace/lgmvae/model.hpp"
#include "lapace/metrics/lof.hpp"
#include "lapace/recourse/lapace.hpp"

namespace lapace::metrics {

using Point = std::vector<double>;
using CeSet = std::vector<Point>;

// Diversity of a set with fewer than two CEs.
inline constexpr double kNoDiversity = -1.0;

double l1(std::span<const double> a, std::span<const double> b);

// Fraction of test points with at least one CE classified as `target`.
double validity(const std::vector<CeSet>& ces, const classifiers::Classifier& classifier,
                int target);
// Mean over test points of the mean L1 distance to their CEs.
double proximity_l1(const std::vector<Point>& inputs, const std::vector<CeSet>& ces);
// Mean over test points of the mean LOF of their CEs.
double plausibility(const LofIndex& index, const std::vector<CeSet>& ces);
// Mean pairwise L1 within one set, kNoDiversity below two CEs.
double diversity(const CeSet& set);
// Mean of diversity() over the sets that have two or more CEs.
double mean_diversity(const std::vector<CeSet>& ces);
// Mean over CEs and pool members of [member(ce) == target].
double model_robustness(const std::vector<CeSet>& ces, const classifiers::RetrainPool& pool,
                        int target);
// L1 Hausdorff distance between two nonempty sets.
double hausdorff_l1(const CeSet& a, const CeSet& b);
// Distance used by input robustness: plain L1 for single CEs, Hausdorff
// otherwise.
double set_distance(const CeSet& a, const CeSet& b);

// Uniform perturbations inside the L-inf ball of `radius`, applied to the
// continuous columns only.
std::vector<Point> perturb(std::span<const double> x, const data::TabularSchema& schema,
                           std::size_t count, double radius, std::uint64_t seed);

struct RobustnessResult {
  double mean_distance = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // perturbations that changed the input's own label
};

using CeGenerator = std::function<CeSet(std::span<const double>)>;

RobustnessResult input_robustness(const CeGenerator& method, std::span<const double> x,
                                  const data::TabularSchema& schema,
                                  const classifiers::Classifier& classifier,
                                  std::size_t count, double radius, std::uint64_t seed);

// Fraction of inputs whose path set contains an entry that is valid and
// constraint-satisfying.
double actionability_rate(const std::vector<std::vector<recourse::LatentPath>>& path_sets,
                          int target);

struct TstrResult {
  double accuracy_real = 0.0;
  double accuracy_synthetic = 0.0;
  double gap() const { return accuracy_real - accuracy_synthetic; }
};

// Trains one classifier on `train` and one on an equally sized synthetic set
// with the same label counts, and scores both on `test`. Labels are the
// predicted labels of both splits.
TstrResult tstr_utility(const lgmvae::LgmvaeModel& model, const data::Dataset& train,
                        const data::Dataset& test, const classifiers::ClassifierSpec& trainer,
                        std::uint64_t seed);

}  // namespace lapace::metrics
