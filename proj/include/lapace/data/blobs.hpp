#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lapace/data/dataset.hpp"

namespace lapace::data {

// centers[label][k] is the k-th Gaussian center of that class.
using ClassCenters = std::vector<std::vector<std::vector<double>>>;

struct BlobOptions {
  // When > 0 a categorical feature "cat" with this many levels is appended.
  // Each center prefers one level; a row takes it with probability
  // `categorical_fidelity` and a uniform level otherwise.
  std::size_t categorical_levels = 0;
  double categorical_fidelity = 0.8;
};

// Isotropic Gaussian blobs, rows split evenly across a class's centers. The
// returned schema is fitted on the generated rows.
Dataset make_blobs(std::size_t n_per_class, const ClassCenters& centers, double spread,
                   std::uint64_t seed, const BlobOptions& options = {});

RawTable make_blobs_raw(std::size_t n_per_class, const ClassCenters& centers, double spread,
                        std::uint64_t seed, const BlobOptions& options = {});

// Two classes with three centers each over four continuous features. The
// classes sit on opposite sides of x0, so every convex combination of one
// class's centers stays on that class's side.
ClassCenters reference_centers();

// 2000 rows per class, reference centers, spread 0.6, three-level categorical.
RawTable reference_blobs(std::uint64_t seed);

}  // namespace lapace::data
