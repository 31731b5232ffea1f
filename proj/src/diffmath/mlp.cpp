#include "lapace/diffmath/mlp.hpp"

#include <cmath>
#include <string>

#include "lapace/error.hpp"

namespace lapace::diffmath {

const char* to_string(Activation activation) {
  switch (activation) {
    case Activation::kLinear:
      return "linear";
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kSoftmax:
      return "softmax";
  }
  return "linear";
}

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softmax") return Activation::kSoftmax;
  throw Error("unknown activation '" + name + "'");
}

MLP::MLP(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& layer = layers_[i];
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols()) {
      throw ShapeError("layer " + std::to_string(i) + ": bias " +
                       layer.bias.shape_string() + " does not fit weight " +
                       layer.weight.shape_string());
    }
    if (i > 0 && layers_[i - 1].weight.cols() != layer.weight.rows()) {
      throw ShapeError("layer " + std::to_string(i) + " input width " +
                       std::to_string(layer.weight.rows()) + " does not chain with " +
                       std::to_string(layers_[i - 1].weight.cols()));
    }
  }
}

void init_uniform_fan_in(Tensor& weight, double gain, std::mt19937_64& rng) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(weight.rows()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : weight.data()) w = dist(rng);
}

MLP MLP::make(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
              Activation hidden_activation, Activation output_activation,
              std::mt19937_64& rng) {
  std::vector<DenseLayer> layers;
  std::size_t width = in;
  auto push = [&](std::size_t next, Activation act) {
    DenseLayer layer{Tensor::zeros(width, next), Tensor::zeros(1, next), act};
    const double gain = act == Activation::kRelu ? std::sqrt(2.0) : 1.0;
    init_uniform_fan_in(layer.weight, gain, rng);
    layers.push_back(std::move(layer));
    width = next;
  };
  for (std::size_t h : hidden) push(h, hidden_activation);
  push(out, output_activation);
  return MLP(std::move(layers));
}

std::size_t MLP::input_width() const {
  return layers_.empty() ? 0 : layers_.front().weight.rows();
}

std::size_t MLP::output_width() const {
  return layers_.empty() ? 0 : layers_.back().weight.cols();
}

std::vector<Tensor*> MLP::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Tensor*> MLP::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

BoundMLP MLP::bind(Tape& tape, bool trainable) const {
  BoundMLP bound;
  for (const auto& layer : layers_) {
    Tensor w = layer.weight;
    Tensor b = layer.bias;
    w.set_requires_grad(trainable);
    b.set_requires_grad(trainable);
    bound.weights.push_back(tape.leaf(std::move(w)));
    bound.biases.push_back(tape.leaf(std::move(b)));
    bound.activations.push_back(layer.activation);
  }
  return bound;
}

Var forward(const BoundMLP& mlp, Var x) {
  if (mlp.weights.empty()) throw ShapeError("forward: empty MLP");
  if (x.value().cols() != mlp.weights.front().value().rows()) {
    throw ShapeError("forward: input width " + std::to_string(x.value().cols()) +
                     " does not match MLP input width " +
                     std::to_string(mlp.weights.front().value().rows()));
  }
  Var h = x;
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    h = add_row(matmul(h, mlp.weights[i]), mlp.biases[i]);
    switch (mlp.activations[i]) {
      case Activation::kLinear:
        break;
      case Activation::kRelu:
        h = relu(h);
        break;
      case Activation::kSigmoid:
        h = sigmoid(h);
        break;
      case Activation::kSoftmax:
        h = softmax_rows(h);
        break;
    }
  }
  if (!h.value().all_finite()) throw NumericError("forward: non-finite MLP output");
  return h;
}

Tensor forward(const MLP& mlp, const Tensor& x) {
  Tape tape;
  const BoundMLP bound = mlp.bind(tape, false);
  return forward(bound, tape.constant(x)).value();
}

std::vector<Tensor> gradients(const BoundMLP& bound) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < bound.weights.size(); ++i) {
    out.push_back(bound.weights[i].grad());
    out.push_back(bound.biases[i].grad());
  }
  return out;
}

}  // namespace lapace::diffmath
