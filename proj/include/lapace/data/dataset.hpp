#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lapace/data/schema.hpp"
#include "lapace/diffmath/tensor.hpp"

namespace lapace::data {

using diffmath::Tensor;

// Rows in original units as read from disk, before encoding.
struct RawTable {
  TabularSchema schema;
  std::vector<RawRow> rows;
  std::vector<int> labels;  // empty when the file carries no label column
};

// Encoded rows (N x d) with ground-truth labels and, once a classifier has
// relabelled them, the classifier's predictions.
struct Dataset {
  TabularSchema schema;
  Tensor X;
  std::vector<int> y_star;
  std::optional<std::vector<int>> y_pred;

  std::size_t size() const { return X.rows(); }
  std::size_t width() const { return X.cols(); }
  std::span<const double> row(std::size_t i) const { return X.row_span(i); }
  // Predicted labels; throws if the dataset has not been relabelled.
  const std::vector<int>& predicted() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  RawTable to_raw() const;
};

// Encodes raw rows with an already fitted schema.
Dataset encode(const RawTable& raw);

RawTable read_csv(const std::string& path, const TabularSchema& schema,
                  bool require_label = true);
void write_csv(const std::string& path, const RawTable& table);

// Reads and encodes. If `schema` has no normalization statistics yet they are
// fitted on this file and written back into `schema`.
Dataset load_csv(const std::string& path, TabularSchema& schema);

struct SplitSpec {
  std::vector<double> fractions{0.8, 0.2};
  std::uint64_t seed = 0;
};

// Seeded shuffle followed by consecutive cuts. The last partition takes the
// rounding remainder.
std::vector<std::vector<std::size_t>> split_indices(std::size_t n, const SplitSpec& spec);
std::vector<Dataset> split(const Dataset& dataset, const SplitSpec& spec);
std::vector<RawTable> split(const RawTable& table, const SplitSpec& spec);

}  // namespace lapace::data
