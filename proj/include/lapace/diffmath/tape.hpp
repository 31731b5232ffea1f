#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "lapace/diffmath/tensor.hpp"

namespace lapace::diffmath {

using NodeId = std::size_t;

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

// Linear record of primitive operations. Nodes are appended in evaluation
// order, so reverse index order is a valid reverse topological order.
class Tape {
 public:
  // Propagates the node's gradient into the gradients of its inputs.
  using Backprop = std::function<void(Tape&, NodeId)>;

  Var leaf(Tensor value);
  Var constant(Tensor value);
  Var record(Tensor value, std::vector<NodeId> inputs, Backprop backprop);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  const Tensor& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Adds `delta` into the gradient accumulator of `id` (no-op for nodes that
  // do not require gradients).
  void accumulate(NodeId id, const Tensor& delta);
  Tensor& grad_mut(NodeId id);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<NodeId> inputs;
    Backprop backprop;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---- primitives ---------------------------------------------------------
// Binary elementwise ops require identical shapes unless noted.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// x (n x m) + bias (1 x m), bias broadcast over rows.
Var add_row(Var x, Var bias);
// x (n x m) * col (n x 1), col broadcast over columns.
Var mul_col(Var x, Var col);
Var scale(Var x, double factor);
Var add_scalar(Var x, double value);
Var neg(Var x);

Var relu(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);
Var square(Var x);
// q * log(q) with the 0 * log(0) = 0 convention.
Var xlogx(Var q);
// Gradient passes only where lo < x < hi.
Var clamp(Var x, double lo, double hi);
// |x|, subgradient 0 at 0.
Var abs(Var x);
// max(0, x), identical to relu but named for penalty code.
Var hinge(Var x);

// Row-wise softmax.
Var softmax_rows(Var logits);
// Row-wise softmax restricted to entries where mask(r, c) != 0; masked
// entries receive exactly zero probability.
Var masked_softmax_rows(Var logits, const Tensor& mask);

Var sum(Var x);
Var mean(Var x);
Var row_sum(Var x);  // n x m -> n x 1
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var select_cols(Var x, const std::vector<std::size_t>& columns);

// Closed-form KL(N(mu_i, exp(logvar_i)) || N(prior_mu_c, exp(prior_logvar_c)))
// for every row i and prior row c, summed over latent dims: (n x K).
Var gaussian_kl_matrix(Var mu, Var logvar, Var prior_mu, Var prior_logvar);

// Per-row reconstruction loss: squared error on columns with
// categorical[c] == false, binary cross-entropy with logits elsewhere.
Var mixed_reconstruction(Var raw_output, const Tensor& target,
                         const std::vector<bool>& categorical);

// Mean categorical cross-entropy of row-wise softmax(logits) against labels.
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

}  // namespace lapace::diffmath
