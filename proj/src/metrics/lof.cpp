#include "lapace/metrics/lof.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lapace/error.hpp"

namespace lapace::metrics {

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

LofIndex::LofIndex(Tensor reference, std::size_t k) : reference_(std::move(reference)), k_(k) {
  if (k_ < 1) throw ConfigError("lof: k must be >= 1");
  if (k_ >= reference_.rows()) {
    throw ConfigError("lof: k = " + std::to_string(k_) + " needs more than k reference points (have " +
                      std::to_string(reference_.rows()) + ")");
  }
  const std::size_t n = reference_.rows();
  std::vector<std::vector<std::size_t>> hoods(n);
  std::vector<std::vector<double>> dists(n);
  k_distance_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    hoods[i] = neighbours(reference_.row_span(i), i, &dists[i]);
    k_distance_[i] = dists[i].back();
  }
  lrd_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double reach = 0.0;
    for (std::size_t m = 0; m < k_; ++m) {
      reach += std::max({k_distance_[hoods[i][m]], dists[i][m], kReachFloor});
    }
    lrd_[i] = static_cast<double>(k_) / reach;
  }
}

std::vector<std::size_t> LofIndex::neighbours(std::span<const double> x,
                                              std::optional<std::size_t> exclude,
                                              std::vector<double>* distances) const {
  if (x.size() != reference_.cols()) throw ShapeError("lof: query dimension mismatch");
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(reference_.rows());
  for (std::size_t i = 0; i < reference_.rows(); ++i) {
    if (exclude && *exclude == i) continue;
    all.emplace_back(euclidean(x, reference_.row_span(i)), i);
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k_), all.end());
  std::vector<std::size_t> idx(k_);
  if (distances) distances->resize(k_);
  for (std::size_t m = 0; m < k_; ++m) {
    idx[m] = all[m].second;
    if (distances) (*distances)[m] = all[m].first;
  }
  return idx;
}

double LofIndex::score_from(std::span<const double> x, std::optional<std::size_t> exclude) const {
  std::vector<double> dist;
  const auto hood = neighbours(x, exclude, &dist);
  double reach = 0.0, neighbour_lrd = 0.0;
  for (std::size_t m = 0; m < k_; ++m) {
    reach += std::max({k_distance_[hood[m]], dist[m], kReachFloor});
    neighbour_lrd += lrd_[hood[m]];
  }
  const double own_lrd = static_cast<double>(k_) / reach;
  return neighbour_lrd / static_cast<double>(k_) / own_lrd;
}

double LofIndex::score(std::span<const double> x) const { return score_from(x, std::nullopt); }

double LofIndex::score_reference(std::size_t i) const {
  if (i >= size()) throw ShapeError("lof: reference index out of range");
  return score_from(reference_.row_span(i), i);
}

}  // namespace lapace::metrics
