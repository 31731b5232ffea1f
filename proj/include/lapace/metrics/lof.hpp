#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lapace/diffmath/tensor.hpp"

namespace lapace::metrics {

using diffmath::Tensor;

// Reachability distances below this are raised to it, so duplicate points
// cannot produce an infinite density.
inline constexpr double kReachFloor = 1e-12;

// Local outlier factor against a fixed reference set (Euclidean distance).
// Neighbourhoods hold exactly k points; distance ties go to the lower index.
class LofIndex {
 public:
  LofIndex(Tensor reference, std::size_t k = 20);

  std::size_t k() const { return k_; }
  std::size_t size() const { return reference_.rows(); }
  const Tensor& reference() const { return reference_; }

  // Score of a query point that is not part of the reference set.
  double score(std::span<const double> x) const;
  // Score of reference point i, which is left out of its own neighbourhood.
  double score_reference(std::size_t i) const;

  double k_distance(std::size_t i) const { return k_distance_[i]; }
  double local_reachability_density(std::size_t i) const { return lrd_[i]; }

 private:
  std::vector<std::size_t> neighbours(std::span<const double> x,
                                      std::optional<std::size_t> exclude,
                                      std::vector<double>* distances) const;
  double score_from(std::span<const double> x, std::optional<std::size_t> exclude) const;

  Tensor reference_;
  std::size_t k_;
  std::vector<double> k_distance_;
  std::vector<double> lrd_;
};

double euclidean(std::span<const double> a, std::span<const double> b);

}  // namespace lapace::metrics
