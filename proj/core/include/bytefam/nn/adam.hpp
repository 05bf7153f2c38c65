#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bytefam/nn/tensor.hpp"

namespace bytefam::nn {

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamSettings settings;
  std::uint64_t step_count = 0;
  std::vector<Tensor<T>> first_moment;   ///< empty until the first step
  std::vector<Tensor<T>> second_moment;
};

/// Bias-corrected Adam update of every tensor in `params` in place.
/// Moments are created (zero) on the first call. Throws ShapeError when the
/// parameter, gradient and moment shapes disagree.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
               AdamState<T>& state);

}  // namespace bytefam::nn
