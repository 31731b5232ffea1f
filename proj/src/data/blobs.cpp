#include "lapace/data/blobs.hpp"

#include <random>
#include <string>

#include "lapace/error.hpp"

namespace lapace::data {

RawTable make_blobs_raw(std::size_t n_per_class, const ClassCenters& centers, double spread,
                        std::uint64_t seed, const BlobOptions& options) {
  if (centers.empty()) throw ConfigError("make_blobs: no classes");
  if (!(spread > 0.0)) throw ConfigError("make_blobs: spread must be positive");
  if (n_per_class == 0) throw ConfigError("make_blobs: n_per_class must be positive");
  std::size_t dim = 0;
  for (const auto& cls : centers) {
    if (cls.empty()) throw ConfigError("make_blobs: every class needs at least one center");
    for (const auto& c : cls) {
      if (dim == 0) dim = c.size();
      if (c.size() != dim || dim == 0) throw ConfigError("make_blobs: inconsistent center width");
    }
  }

  std::vector<Feature> features;
  for (std::size_t j = 0; j < dim; ++j) {
    features.push_back({"x" + std::to_string(j), FeatureKind::kContinuous, {}, std::nullopt});
  }
  if (options.categorical_levels > 0) {
    Feature cat{"cat", FeatureKind::kCategorical, {}, std::nullopt};
    for (std::size_t l = 0; l < options.categorical_levels; ++l) {
      cat.levels.push_back(std::string(1, static_cast<char>('a' + l % 26)) +
                           (l >= 26 ? std::to_string(l / 26) : ""));
    }
    features.push_back(std::move(cat));
  }
  RawTable table{TabularSchema(std::move(features), "label", centers.size()), {}, {}};

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t label = 0; label < centers.size(); ++label) {
    const auto& cls = centers[label];
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::size_t k = i % cls.size();
      RawRow row;
      for (double c : cls[k]) row.push_back(c + noise(rng));
      if (options.categorical_levels > 0) {
        const std::size_t levels = options.categorical_levels;
        std::size_t level = (k + label) % levels;
        if (unit(rng) >= options.categorical_fidelity) {
          level = static_cast<std::size_t>(unit(rng) * static_cast<double>(levels)) % levels;
        }
        row.push_back(static_cast<double>(level));
      }
      table.rows.push_back(std::move(row));
      table.labels.push_back(static_cast<int>(label));
    }
  }
  return table;
}

Dataset make_blobs(std::size_t n_per_class, const ClassCenters& centers, double spread,
                   std::uint64_t seed, const BlobOptions& options) {
  RawTable raw = make_blobs_raw(n_per_class, centers, spread, seed, options);
  raw.schema.fit(raw.rows);
  return encode(raw);
}

ClassCenters reference_centers() {
  return {
      {{-3.0, 0.0, 0.0, 0.0}, {-3.5, 4.0, 2.0, -2.0}, {-4.0, -3.0, -2.5, 3.0}},
      {{3.0, 0.5, 1.0, 1.0}, {4.0, 4.0, -2.0, 0.0}, {3.5, -4.0, 2.5, -3.0}},
  };
}

RawTable reference_blobs(std::uint64_t seed) {
  return make_blobs_raw(2000, reference_centers(), 0.6, seed, BlobOptions{3, 0.8});
}

}  // namespace lapace::data
