#include "lapace/diffmath/adam.hpp"

#include <cmath>
#include <string>

#include "lapace/error.hpp"

namespace lapace::diffmath {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               AdamState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.push_back(Tensor::zeros(p->rows(), p->cols()));
      state.second_moment.push_back(Tensor::zeros(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks a different parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first_moment[i])) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " " +
                       params[i]->shape_string() + " vs gradient " +
                       grads[i].shape_string());
    }
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    const auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace lapace::diffmath
