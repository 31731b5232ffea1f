#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lapace/diffmath/tensor.hpp"

namespace lapace::diffmath {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

// One bias-corrected Adam update in place. Moments are created on the first
// call and must stay congruent with `params` afterwards.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               AdamState& state);

}  // namespace lapace::diffmath
