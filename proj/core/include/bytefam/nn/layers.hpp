#pragma once

// Batched layer operations. Each forward has a matching backward that takes
// the upstream gradient and returns gradients for inputs and parameters.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bytefam/nn/kernels.hpp"
#include "bytefam/nn/tensor.hpp"
#include "bytefam/random.hpp"

namespace bytefam::nn {

// -- convolution ------------------------------------------------------------

/// input [N x Cin x L], weights [Cout x Cin x K], bias [Cout]
/// -> [N x Cout x (L-K+1)]. Valid cross-correlation, stride 1.
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct Conv1dGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& grad_output);

// -- pooling / activation -----------------------------------------------------

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;                   ///< [N x C x floor(L / width)]
  std::vector<std::uint32_t> argmax;  ///< in-row index of each window max
};

template <typename T>
MaxPoolResult<T> maxpool1d_forward(const Tensor<T>& input, std::size_t width);

template <typename T>
Tensor<T> maxpool1d_backward(const Tensor<T>& grad_output, const MaxPoolResult<T>& forward,
                             const Shape& input_shape, std::size_t width);

template <typename T>
Tensor<T> relu_forward(Tensor<T> input);

/// Gradient masked by the forward output.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, Tensor<T> grad_output);

// -- dense ----------------------------------------------------------------------

/// input [N x D], weights [D x U], bias [U] -> [N x U].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& grad_output);

// -- LSTM -------------------------------------------------------------------------

enum class Direction { Forward, Backward };

/// Gate blocks are stacked in the order input, forget, cell, output.
template <typename T>
struct LstmParams {
  Tensor<T> input_weights;      ///< [4H x D]
  Tensor<T> recurrent_weights;  ///< [4H x H]
  Tensor<T> bias;               ///< [4H]

  static LstmParams zeros(std::size_t input_size, std::size_t hidden);

  std::size_t hidden() const { return recurrent_weights.dim(1); }
  std::size_t input_size() const { return input_weights.dim(1); }
  std::size_t parameter_count() const {
    return input_weights.size() + recurrent_weights.size() + bias.size();
  }
};

/// 4 * (H * (D + H) + H)
constexpr std::size_t lstm_parameter_count(std::size_t input_size, std::size_t hidden) {
  return 4 * (hidden * (input_size + hidden) + hidden);
}

template <typename T>
struct LstmOutput {
  Tensor<T> hidden;       ///< [N x T x H]
  Tensor<T> final_state;  ///< [N x H], state after the last processed step
  std::vector<kernels::LstmCache<T>> caches;
};

/// input [N x T x D]. Zero initial state. Direction::Backward processes
/// t = T..1 over the same input.
template <typename T>
LstmOutput<T> lstm_forward(const Tensor<T>& input, const LstmParams<T>& params, Direction direction);

template <typename T>
struct LstmGrads {
  Tensor<T> input;
  LstmParams<T> params;
};

/// Either upstream gradient may be an empty tensor.
template <typename T>
LstmGrads<T> lstm_backward(const Tensor<T>& input, const LstmParams<T>& params,
                           Direction direction, const LstmOutput<T>& forward,
                           const Tensor<T>& grad_hidden, const Tensor<T>& grad_final);

// -- dropout ------------------------------------------------------------------------

enum class Mode { Train, Infer };

/// Fills `mask` with 0 (probability rate) or 1/(1-rate).
template <typename T>
void fill_dropout_mask(std::span<T> mask, double rate, Rng& rng);

template <typename T>
struct DropoutResult {
  Tensor<T> output;
  Tensor<T> mask;  ///< multiply upstream gradients by this in backward
};

/// Inverted dropout. Infer mode, or rate 0, is the identity (mask of ones).
/// Throws ArgumentError unless 0 <= rate < 1.
template <typename T>
DropoutResult<T> dropout(const Tensor<T>& input, double rate, Mode mode, Rng& rng);

// -- loss -----------------------------------------------------------------------------

template <typename T>
struct SoftmaxXentResult {
  T loss = 0;                  ///< mean over the batch
  Tensor<T> probabilities;     ///< [N x C]
};

/// logits [N x C]. Throws ArgumentError for a label outside 0..C-1.
template <typename T>
SoftmaxXentResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// (p - onehot) / N
template <typename T>
Tensor<T> softmax_cross_entropy_backward(const Tensor<T>& probabilities,
                                         std::span<const int> labels);

/// lambda * sum of squares over all given weight tensors.
template <typename T>
T l2_penalty(std::span<const Tensor<T>* const> weights, double lambda);

/// Adds 2 * lambda * w to `grad`.
template <typename T>
void add_l2_gradient(const Tensor<T>& weights, double lambda, Tensor<T>& grad);

}  // namespace bytefam::nn
