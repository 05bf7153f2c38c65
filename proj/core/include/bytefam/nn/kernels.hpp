#pragma once

// Single-sample kernels over contiguous row-major buffers. The batched layer
// API in layers.hpp and the model network are both built on these.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bytefam/nn/aligned.hpp"

namespace bytefam::nn::kernels {

/// x: [cin x len], w: [cout x cin x k], b: [cout], y: [cout x (len-k+1)].
/// `col` is scratch for the im2col matrix.
template <typename T>
void conv1d_forward(const T* x, std::size_t cin, std::size_t len, const T* w, const T* b,
                    std::size_t cout, std::size_t k, T* y, Buffer<T>& col);

/// Accumulates into dw, db. Overwrites dx when it is non-null.
template <typename T>
void conv1d_backward(const T* x, std::size_t cin, std::size_t len, const T* w, std::size_t cout,
                     std::size_t k, const T* dy, T* dw, T* db, T* dx, Buffer<T>& col,
                     Buffer<T>& dcol);

template <typename T>
void relu_forward(T* y, std::size_t n);

/// dy[i] = 0 wherever the activation y[i] was clamped.
template <typename T>
void relu_backward(const T* y, T* dy, std::size_t n);

/// Non-overlapping max pooling per channel row; trailing remainder dropped.
/// argmax holds the in-row input index of each window maximum (first on ties).
template <typename T>
void maxpool_forward(const T* x, std::size_t channels, std::size_t len, std::size_t width, T* y,
                     std::uint32_t* argmax);

/// Overwrites dx ([channels x len]).
template <typename T>
void maxpool_backward(const T* dy, const std::uint32_t* argmax, std::size_t channels,
                      std::size_t len, std::size_t width, T* dx);

/// y[u] = b[u] + sum_d x[d] w[d,u]; w is [d x u].
template <typename T>
void dense_forward(const T* x, std::size_t d, const T* w, const T* b, std::size_t u, T* y);

template <typename T>
void dense_backward(const T* x, std::size_t d, const T* w, std::size_t u, const T* dy, T* dw,
                    T* db, T* dx);

/// Per-sample LSTM activations, all time-major.
template <typename T>
struct LstmCache {
  Buffer<T> gates;   ///< [steps x 4h], activated i, f, g, o
  Buffer<T> cell;    ///< [steps x h]
  Buffer<T> hidden;  ///< [steps x h]
};

/// x: [d x steps] (feature-major, column t is the input at step t).
/// wx: [4h x d], wh: [4h x h], b: [4h], gate blocks in order i, f, g, o.
/// `reverse` walks t = steps-1 .. 0. hidden row t is the state at position t.
template <typename T>
void lstm_forward(const T* x, std::size_t d, std::size_t steps, const T* wx, const T* wh,
                  const T* b, std::size_t h, bool reverse, LstmCache<T>& cache);

/// d_hidden ([steps x h]) and d_final ([h]) may each be null. Accumulates
/// dwx, dwh, db; overwrites dx ([d x steps]) when non-null.
template <typename T>
void lstm_backward(const T* x, std::size_t d, std::size_t steps, const T* wx, const T* wh,
                   std::size_t h, bool reverse, const LstmCache<T>& cache, const T* d_hidden,
                   const T* d_final, T* dwx, T* dwh, T* db, T* dx);

/// Stable softmax of one row; returns -log p[label].
template <typename T>
T softmax_xent_forward(const T* logits, std::size_t classes, int label, T* probs);

/// dlogits = scale * (probs - onehot(label)).
template <typename T>
void softmax_xent_backward(const T* probs, std::size_t classes, int label, T scale, T* dlogits);

}  // namespace bytefam::nn::kernels
