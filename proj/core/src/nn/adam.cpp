#include "bytefam/nn/adam.hpp"

#include <cmath>

#include "bytefam/errors.hpp"

namespace bytefam::nn {

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
               AdamState<T>& state) {
  if (params.size() != grads.size()) throw ShapeError("adam: one gradient per parameter tensor");
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam: state/parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != state.first_moment[i].shape()) {
      throw ShapeError("adam: shape mismatch for parameter tensor " + std::to_string(i));
    }
  }

  const auto& s = state.settings;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(s.beta1, t);
  const double correction2 = 1.0 - std::pow(s.beta2, t);
  const T b1 = static_cast<T>(s.beta1);
  const T b2 = static_cast<T>(s.beta2);
  const T one_minus_b1 = static_cast<T>(1.0 - s.beta1);
  const T one_minus_b2 = static_cast<T>(1.0 - s.beta2);
  const T step = static_cast<T>(s.learning_rate / correction1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(correction2));
  const T eps = static_cast<T>(s.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->ptr();
    const T* g = grads[i]->ptr();
    T* m = state.first_moment[i].ptr();
    T* v = state.second_moment[i].ptr();
    const std::size_t n = params[i]->size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + one_minus_b1 * g[j];
      v[j] = b2 * v[j] + one_minus_b2 * g[j] * g[j];
      p[j] -= step * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
    }
  }
}

template void adam_step(std::span<Tensor<float>* const>, std::span<const Tensor<float>* const>,
                        AdamState<float>&);
template void adam_step(std::span<Tensor<double>* const>, std::span<const Tensor<double>* const>,
                        AdamState<double>&);

}  // namespace bytefam::nn
