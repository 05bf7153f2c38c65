#pragma once

// Forward/backward execution of a ModelParams graph over a batch.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "bytefam/models.hpp"
#include "bytefam/nn/layers.hpp"

namespace bytefam {

/// Records one forward pass over a batch and computes parameter gradients
/// of   mean cross-entropy + l2_lambda * sum(conv kernel weights^2).
///
/// The batch is split into a fixed number of chunks that depends only on
/// the batch size. Gradients are accumulated per chunk and reduced in chunk
/// order, so results are bit-identical for any thread count.
template <typename T>
class Network {
 public:
  /// `params` must outlive the network and stay unchanged between a forward
  /// pass and its backward pass.
  explicit Network(const ModelParams<T>& params, unsigned threads = 0);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  void set_threads(unsigned threads) { threads_ = threads; }

  /// Runs the model on `rows` (each `config.input_len` values). In train
  /// mode, sample i of the batch draws its dropout masks from the stream
  /// derive_seed(dropout_seed, {i}). Returns probabilities [N x classes].
  const nn::Tensor<T>& forward(std::span<const T* const> rows, nn::Mode mode,
                               std::uint64_t dropout_seed = 0);

  const nn::Tensor<T>& probabilities() const;
  const nn::Tensor<T>& logits() const;

  /// Mean cross-entropy of the recorded pass (no penalty).
  T data_loss(std::span<const int> labels) const;
  /// data_loss + L2 penalty.
  T loss(std::span<const int> labels) const;

  /// Gradients for every parameter tensor, same layout as the params.
  /// Throws StateError if no forward pass has been recorded.
  ModelParams<T> backward(std::span<const int> labels);

  /// Number of gradient chunks used for a batch of n samples.
  static std::size_t chunk_count(std::size_t n);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  unsigned threads_;
};

extern template class Network<float>;
extern template class Network<double>;

/// Inference over a row-major batch [N x input_len]; dropout disabled.
/// Throws ShapeError when the row length differs from config.input_len.
template <typename T>
nn::Tensor<T> predict_proba(const ModelParams<T>& params, const nn::Tensor<T>& batch,
                            unsigned threads = 0);

/// Row-wise argmax, lowest index on ties.
template <typename T>
std::vector<int> argmax_rows(const nn::Tensor<T>& probabilities);

template <typename T>
std::vector<int> predict_class(const ModelParams<T>& params, const nn::Tensor<T>& batch,
                               unsigned threads = 0);

}  // namespace bytefam
