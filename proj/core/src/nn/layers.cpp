#include "bytefam/nn/layers.hpp"

#include <algorithm>
#include <string>

#include "bytefam/errors.hpp"

namespace bytefam::nn {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// [N x T x D] sample n -> [D x T]
template <typename T>
Buffer<T> feature_major(const Tensor<T>& input, std::size_t n) {
  const std::size_t steps = input.dim(1);
  const std::size_t d = input.dim(2);
  Buffer<T> x(d * steps);
  const T* src = input.ptr() + n * steps * d;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < d; ++j) x[j * steps + t] = src[t * d + j];
  }
  return x;
}

}  // namespace

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  require_rank(input, 3, "conv1d input");
  require_rank(weights, 3, "conv1d weights");
  require_rank(bias, 1, "conv1d bias");
  const std::size_t n = input.dim(0), cin = input.dim(1), len = input.dim(2);
  const std::size_t cout = weights.dim(0), k = weights.dim(2);
  require(weights.dim(1) == cin, "conv1d weights expect " + std::to_string(weights.dim(1)) +
                                     " input channels, got " + std::to_string(cin));
  require(bias.dim(0) == cout, "conv1d bias length must equal output channels");
  require(len >= k, "conv1d input length " + std::to_string(len) + " is shorter than kernel " +
                        std::to_string(k));
  const std::size_t out_len = len - k + 1;
  Tensor<T> out({n, cout, out_len});
  Buffer<T> col;
  for (std::size_t i = 0; i < n; ++i) {
    kernels::conv1d_forward(input.ptr() + i * cin * len, cin, len, weights.ptr(), bias.ptr(), cout,
                            k, out.ptr() + i * cout * out_len, col);
  }
  return out;
}

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& grad_output) {
  const std::size_t n = input.dim(0), cin = input.dim(1), len = input.dim(2);
  const std::size_t cout = weights.dim(0), k = weights.dim(2);
  require(grad_output.shape() == Shape{n, cout, len - k + 1}, "conv1d grad_output shape mismatch");
  Conv1dGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), Tensor<T>({cout})};
  Buffer<T> col, dcol;
  const std::size_t out_len = len - k + 1;
  for (std::size_t i = 0; i < n; ++i) {
    kernels::conv1d_backward(input.ptr() + i * cin * len, cin, len, weights.ptr(), cout, k,
                             grad_output.ptr() + i * cout * out_len, g.weights.ptr(), g.bias.ptr(),
                             g.input.ptr() + i * cin * len, col, dcol);
  }
  return g;
}

template <typename T>
MaxPoolResult<T> maxpool1d_forward(const Tensor<T>& input, std::size_t width) {
  require_rank(input, 3, "maxpool input");
  if (width == 0) throw ArgumentError("pool width must be positive");
  const std::size_t n = input.dim(0), c = input.dim(1), len = input.dim(2);
  require(len >= width, "maxpool input length " + std::to_string(len) + " is shorter than width " +
                            std::to_string(width));
  const std::size_t out_len = len / width;
  MaxPoolResult<T> r{Tensor<T>({n, c, out_len}), std::vector<std::uint32_t>(n * c * out_len)};
  for (std::size_t i = 0; i < n; ++i) {
    kernels::maxpool_forward(input.ptr() + i * c * len, c, len, width,
                             r.output.ptr() + i * c * out_len, r.argmax.data() + i * c * out_len);
  }
  return r;
}

template <typename T>
Tensor<T> maxpool1d_backward(const Tensor<T>& grad_output, const MaxPoolResult<T>& forward,
                             const Shape& input_shape, std::size_t width) {
  require(grad_output.shape() == forward.output.shape(), "maxpool grad_output shape mismatch");
  const std::size_t n = input_shape.at(0), c = input_shape.at(1), len = input_shape.at(2);
  const std::size_t out_len = len / width;
  Tensor<T> dx(input_shape);
  for (std::size_t i = 0; i < n; ++i) {
    kernels::maxpool_backward(grad_output.ptr() + i * c * out_len,
                              forward.argmax.data() + i * c * out_len, c, len, width,
                              dx.ptr() + i * c * len);
  }
  return dx;
}

template <typename T>
Tensor<T> relu_forward(Tensor<T> input) {
  kernels::relu_forward(input.ptr(), input.size());
  return input;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, Tensor<T> grad_output) {
  require(output.shape() == grad_output.shape(), "relu grad shape mismatch");
  kernels::relu_backward(output.ptr(), grad_output.ptr(), output.size());
  return grad_output;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weights, 2, "dense weights");
  require_rank(bias, 1, "dense bias");
  const std::size_t n = input.dim(0), d = input.dim(1), u = weights.dim(1);
  require(weights.dim(0) == d, "dense weights expect " + std::to_string(weights.dim(0)) +
                                   " inputs, got " + std::to_string(d));
  require(bias.dim(0) == u, "dense bias length must equal units");
  Tensor<T> out({n, u});
  for (std::size_t i = 0; i < n; ++i) {
    kernels::dense_forward(input.ptr() + i * d, d, weights.ptr(), bias.ptr(), u, out.ptr() + i * u);
  }
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& grad_output) {
  const std::size_t n = input.dim(0), d = input.dim(1), u = weights.dim(1);
  require(grad_output.shape() == Shape{n, u}, "dense grad_output shape mismatch");
  DenseGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), Tensor<T>({u})};
  for (std::size_t i = 0; i < n; ++i) {
    kernels::dense_backward(input.ptr() + i * d, d, weights.ptr(), u, grad_output.ptr() + i * u,
                            g.weights.ptr(), g.bias.ptr(), g.input.ptr() + i * d);
  }
  return g;
}

template <typename T>
LstmParams<T> LstmParams<T>::zeros(std::size_t input_size, std::size_t hidden) {
  return {Tensor<T>({4 * hidden, input_size}), Tensor<T>({4 * hidden, hidden}),
          Tensor<T>({4 * hidden})};
}

template <typename T>
LstmOutput<T> lstm_forward(const Tensor<T>& input, const LstmParams<T>& params, Direction direction) {
  require_rank(input, 3, "lstm input");
  const std::size_t n = input.dim(0), steps = input.dim(1), d = input.dim(2);
  const std::size_t h = params.hidden();
  require(steps >= 1, "lstm needs at least one timestep");
  require(params.input_size() == d, "lstm input width mismatch");
  const bool reverse = direction == Direction::Backward;
  LstmOutput<T> out{Tensor<T>({n, steps, h}), Tensor<T>({n, h}), {}};
  out.caches.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = feature_major(input, i);
    auto& cache = out.caches[i];
    kernels::lstm_forward(x.data(), d, steps, params.input_weights.ptr(),
                          params.recurrent_weights.ptr(), params.bias.ptr(), h, reverse, cache);
    std::copy(cache.hidden.begin(), cache.hidden.end(), out.hidden.ptr() + i * steps * h);
    const std::size_t last = reverse ? 0 : steps - 1;
    std::copy_n(cache.hidden.begin() + static_cast<std::ptrdiff_t>(last * h), h,
                out.final_state.ptr() + i * h);
  }
  return out;
}

template <typename T>
LstmGrads<T> lstm_backward(const Tensor<T>& input, const LstmParams<T>& params,
                           Direction direction, const LstmOutput<T>& forward,
                           const Tensor<T>& grad_hidden, const Tensor<T>& grad_final) {
  const std::size_t n = input.dim(0), steps = input.dim(1), d = input.dim(2);
  const std::size_t h = params.hidden();
  if (forward.caches.size() != n) throw StateError("lstm backward without a matching forward");
  if (!grad_hidden.empty()) require(grad_hidden.shape() == Shape{n, steps, h}, "lstm grad_hidden shape");
  if (!grad_final.empty()) require(grad_final.shape() == Shape{n, h}, "lstm grad_final shape");
  LstmGrads<T> g{Tensor<T>(input.shape()), LstmParams<T>::zeros(d, h)};
  Buffer<T> dx(d * steps);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = feature_major(input, i);
    kernels::lstm_backward(x.data(), d, steps, params.input_weights.ptr(),
                           params.recurrent_weights.ptr(), h, direction == Direction::Backward,
                           forward.caches[i],
                           grad_hidden.empty() ? nullptr : grad_hidden.ptr() + i * steps * h,
                           grad_final.empty() ? nullptr : grad_final.ptr() + i * h,
                           g.params.input_weights.ptr(), g.params.recurrent_weights.ptr(),
                           g.params.bias.ptr(), dx.data());
    T* dst = g.input.ptr() + i * steps * d;
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t j = 0; j < d; ++j) dst[t * d + j] = dx[j * steps + t];
    }
  }
  return g;
}

template <typename T>
void fill_dropout_mask(std::span<T> mask, double rate, Rng& rng) {
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask) m = uniform01(rng) < rate ? T(0) : keep_scale;
}

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& input, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout rate must be in [0, 1)");
  DropoutResult<T> r{input, Tensor<T>(input.shape(), T(1))};
  if (mode == Mode::Infer || rate == 0.0) return r;
  fill_dropout_mask(r.mask.data(), rate, rng);
  for (std::size_t i = 0; i < input.size(); ++i) r.output[i] *= r.mask[i];
  return r;
}

template <typename T>
SoftmaxXentResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits, 2, "logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) throw ArgumentError("one label per logits row is required");
  SoftmaxXentResult<T> r{T(0), Tensor<T>(logits.shape())};
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= static_cast<int>(c)) {
      throw ArgumentError("label " + std::to_string(labels[i]) + " outside 0.." +
                          std::to_string(c - 1));
    }
    r.loss += kernels::softmax_xent_forward(logits.ptr() + i * c, c, labels[i],
                                            r.probabilities.ptr() + i * c);
  }
  r.loss /= static_cast<T>(n);
  return r;
}

template <typename T>
Tensor<T> softmax_cross_entropy_backward(const Tensor<T>& probabilities, std::span<const int> labels) {
  const std::size_t n = probabilities.dim(0), c = probabilities.dim(1);
  Tensor<T> g(probabilities.shape());
  for (std::size_t i = 0; i < n; ++i) {
    kernels::softmax_xent_backward(probabilities.ptr() + i * c, c, labels[i],
                                   T(1) / static_cast<T>(n), g.ptr() + i * c);
  }
  return g;
}

template <typename T>
T l2_penalty(std::span<const Tensor<T>* const> weights, double lambda) {
  if (lambda == 0.0) return T(0);
  double sum = 0.0;
  for (const auto* w : weights) {
    for (const T v : w->data()) sum += static_cast<double>(v) * static_cast<double>(v);
  }
  return static_cast<T>(lambda * sum);
}

template <typename T>
void add_l2_gradient(const Tensor<T>& weights, double lambda, Tensor<T>& grad) {
  require(weights.shape() == grad.shape(), "l2 gradient shape mismatch");
  const T scale = static_cast<T>(2.0 * lambda);
  for (std::size_t i = 0; i < weights.size(); ++i) grad[i] += scale * weights[i];
}

#define BYTEFAM_INSTANTIATE(T)                                                                    \
  template Tensor<T> conv1d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template Conv1dGrads<T> conv1d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template MaxPoolResult<T> maxpool1d_forward(const Tensor<T>&, std::size_t);                     \
  template Tensor<T> maxpool1d_backward(const Tensor<T>&, const MaxPoolResult<T>&, const Shape&, \
                                        std::size_t);                                             \
  template Tensor<T> relu_forward(Tensor<T>);                                                     \
  template Tensor<T> relu_backward(const Tensor<T>&, Tensor<T>);                                  \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template struct LstmParams<T>;                                                                  \
  template LstmOutput<T> lstm_forward(const Tensor<T>&, const LstmParams<T>&, Direction);         \
  template LstmGrads<T> lstm_backward(const Tensor<T>&, const LstmParams<T>&, Direction,          \
                                      const LstmOutput<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template void fill_dropout_mask(std::span<T>, double, Rng&);                                    \
  template DropoutResult<T> dropout(const Tensor<T>&, double, Mode, Rng&);                        \
  template SoftmaxXentResult<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);    \
  template Tensor<T> softmax_cross_entropy_backward(const Tensor<T>&, std::span<const int>);      \
  template T l2_penalty(std::span<const Tensor<T>* const>, double);                               \
  template void add_l2_gradient(const Tensor<T>&, double, Tensor<T>&);

BYTEFAM_INSTANTIATE(float)
BYTEFAM_INSTANTIATE(double)

#undef BYTEFAM_INSTANTIATE

}  // namespace bytefam::nn
