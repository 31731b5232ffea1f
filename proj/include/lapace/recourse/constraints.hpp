#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lapace/data/schema.hpp"
#include "lapace/diffmath/tape.hpp"

namespace lapace::recourse {

using diffmath::Tensor;
using diffmath::Var;

// Keeps a continuous feature inside [min, max] (raw units). Either bound may
// be absent.
struct BoxConstraint {
  std::string feature;
  std::optional<double> min;
  std::optional<double> max;
  friend bool operator==(const BoxConstraint&, const BoxConstraint&) = default;
};

// feature_a >= feature_b (raw units).
struct GreaterConstraint {
  std::string feature_a;
  std::string feature_b;
  friend bool operator==(const GreaterConstraint&, const GreaterConstraint&) = default;
};

using ConstraintTerm = std::variant<BoxConstraint, GreaterConstraint>;

// User-facing constraint list, as read from a constraint file or request body.
struct ConstraintSpec {
  std::vector<ConstraintTerm> terms;

  bool empty() const { return terms.empty(); }
  nlohmann::json to_json() const;
  // Accepts either a bare array of terms or {"terms": [...]}.
  static ConstraintSpec from_json(const nlohmann::json& j);
  static ConstraintSpec load(const std::string& path);
  friend bool operator==(const ConstraintSpec&, const ConstraintSpec&) = default;
};

nlohmann::json term_to_json(const ConstraintTerm& term);
ConstraintTerm term_from_json(const nlohmann::json& j);

inline constexpr double kSatisfiedTolerance = 1e-9;

// Affine penalty g(x) = offset + sum_j coef_j * x[column_j] over encoded
// (normalized) columns; the term is satisfied when g(x) <= 0.
struct AffineTerm {
  std::vector<std::size_t> columns;
  std::vector<double> coefficients;
  double offset = 0.0;
  double evaluate(std::span<const double> x) const;
};

// Constraint terms compiled against a schema. The aggregate penalty is the
// hinge sum of the individual terms.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  ConstraintSet(const ConstraintSpec& spec, const data::TabularSchema& schema);

  const ConstraintSpec& spec() const { return spec_; }
  const std::vector<AffineTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  // False when some box has min > max, so no point can satisfy the set.
  bool feasible() const;

  double penalty(std::span<const double> x) const;
  bool satisfied(std::span<const double> x) const { return penalty(x) <= kSatisfiedTolerance; }
  // Row-wise hinge sum, n x 1.
  Var penalty(Var x) const;

  // Naive repair in encoded space: pairwise violations copy feature_b into
  // feature_a, then box bounds are clamped.
  std::vector<double> clamp(std::span<const double> x) const;

 private:
  struct BoxBounds {
    std::size_t column;
    std::optional<double> min;  // normalized
    std::optional<double> max;
  };
  struct PairColumns {
    std::size_t feature_a, feature_b, column_a, column_b;
  };

  ConstraintSpec spec_;
  data::TabularSchema schema_;
  std::vector<AffineTerm> terms_;
  std::vector<BoxBounds> boxes_;
  std::vector<PairColumns> pairs_;
};

}  // namespace lapace::recourse
