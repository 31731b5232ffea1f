#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "lapace/diffmath/tape.hpp"
#include "lapace/diffmath/tensor.hpp"

namespace lapace::diffmath {

enum class Activation { kLinear, kRelu, kSigmoid, kSoftmax };

const char* to_string(Activation activation);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
  Activation activation = Activation::kLinear;
};

// Parameters of an MLP recorded as leaves of one tape.
struct BoundMLP {
  std::vector<Var> weights;
  std::vector<Var> biases;
  std::vector<Activation> activations;
};

class MLP {
 public:
  MLP() = default;
  explicit MLP(std::vector<DenseLayer> layers);

  // in -> hidden... -> out. Hidden layers use `hidden_activation`; weights are
  // drawn uniformly with a fan-in scaled bound, biases start at zero.
  static MLP make(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                  Activation hidden_activation, Activation output_activation,
                  std::mt19937_64& rng);

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t depth() const { return layers_.size(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  // Weight, bias, weight, bias, ... in layer order.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  BoundMLP bind(Tape& tape, bool trainable) const;

 private:
  std::vector<DenseLayer> layers_;
};

Var forward(const BoundMLP& mlp, Var x);
// Tape-free evaluation for inference.
Tensor forward(const MLP& mlp, const Tensor& x);

// Gradients of a bound MLP in parameters() order.
std::vector<Tensor> gradients(const BoundMLP& bound);

void init_uniform_fan_in(Tensor& weight, double gain, std::mt19937_64& rng);

}  // namespace lapace::diffmath
