#include "bytefam/nn/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

namespace bytefam::nn::kernels {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MapVec = Eigen::Map<Vec<T>>;
template <typename T>
using CMapVec = Eigen::Map<const Vec<T>>;

template <typename T>
using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
template <typename T>
using MapArr = Eigen::Map<Arr<T>>;
template <typename T>
using CMapArr = Eigen::Map<const Arr<T>>;

// col[(c*k + j), t] = x[c, t + j]
template <typename T>
void im2col(const T* x, std::size_t cin, std::size_t len, std::size_t k, T* col) {
  const std::size_t out_len = len - k + 1;
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      std::memcpy(col + (c * k + j) * out_len, x + c * len + j, out_len * sizeof(T));
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t cin, std::size_t len, std::size_t k, T* dx) {
  const std::size_t out_len = len - k + 1;
  std::fill(dx, dx + cin * len, T(0));
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      const T* src = col + (c * k + j) * out_len;
      T* dst = dx + c * len + j;
      for (std::size_t t = 0; t < out_len; ++t) dst[t] += src[t];
    }
  }
}

}  // namespace

template <typename T>
void conv1d_forward(const T* x, std::size_t cin, std::size_t len, const T* w, const T* b,
                    std::size_t cout, std::size_t k, T* y, Buffer<T>& col) {
  const std::size_t out_len = len - k + 1;
  const std::size_t rows = cin * k;
  col.resize(rows * out_len);
  im2col(x, cin, len, k, col.data());
  CMapMat<T> wm(w, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(rows));
  CMapMat<T> cm(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(out_len));
  MapMat<T> ym(y, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(out_len));
  ym.noalias() = wm * cm;
  ym.colwise() += CMapVec<T>(b, static_cast<Eigen::Index>(cout));
}

template <typename T>
void conv1d_backward(const T* x, std::size_t cin, std::size_t len, const T* w, std::size_t cout,
                     std::size_t k, const T* dy, T* dw, T* db, T* dx, Buffer<T>& col,
                     Buffer<T>& dcol) {
  const std::size_t out_len = len - k + 1;
  const std::size_t rows = cin * k;
  const auto r = static_cast<Eigen::Index>(rows);
  const auto o = static_cast<Eigen::Index>(cout);
  const auto l = static_cast<Eigen::Index>(out_len);
  col.resize(rows * out_len);
  im2col(x, cin, len, k, col.data());
  CMapMat<T> dym(dy, o, l);
  CMapMat<T> cm(col.data(), r, l);
  MapMat<T>(dw, o, r).noalias() += dym * cm.transpose();
  // Plain loop: Eigen's reductions over maps peel by address alignment, which
  // would make the summation order depend on where the buffer was allocated.
  for (std::size_t c = 0; c < cout; ++c) {
    T sum = T(0);
    for (std::size_t t = 0; t < out_len; ++t) sum += dy[c * out_len + t];
    db[c] += sum;
  }
  if (dx != nullptr) {
    dcol.resize(rows * out_len);
    MapMat<T>(dcol.data(), r, l).noalias() = CMapMat<T>(w, o, r).transpose() * dym;
    col2im(dcol.data(), cin, len, k, dx);
  }
}

template <typename T>
void relu_forward(T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] > T(0) ? y[i] : T(0);
}

template <typename T>
void relu_backward(const T* y, T* dy, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dy[i] = y[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
void maxpool_forward(const T* x, std::size_t channels, std::size_t len, std::size_t width, T* y,
                     std::uint32_t* argmax) {
  const std::size_t out_len = len / width;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* row = x + c * len;
    for (std::size_t t = 0; t < out_len; ++t) {
      auto best = static_cast<std::uint32_t>(t * width);
      T peak = row[best];
      for (auto j = best + 1; j < (t + 1) * width; ++j) {
        const bool above = row[j] > peak;  // strict: ties keep the first index
        peak = above ? row[j] : peak;
        best = above ? j : best;
      }
      y[c * out_len + t] = peak;
      argmax[c * out_len + t] = best;
    }
  }
}

template <typename T>
void maxpool_backward(const T* dy, const std::uint32_t* argmax, std::size_t channels,
                      std::size_t len, std::size_t width, T* dx) {
  const std::size_t out_len = len / width;
  std::fill(dx, dx + channels * len, T(0));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < out_len; ++t) {
      dx[c * len + argmax[c * out_len + t]] += dy[c * out_len + t];
    }
  }
}

template <typename T>
void dense_forward(const T* x, std::size_t d, const T* w, const T* b, std::size_t u, T* y) {
  const auto di = static_cast<Eigen::Index>(d);
  const auto ui = static_cast<Eigen::Index>(u);
  MapVec<T> ym(y, ui);
  ym.noalias() = CMapMat<T>(w, di, ui).transpose() * CMapVec<T>(x, di);
  ym += CMapVec<T>(b, ui);
}

template <typename T>
void dense_backward(const T* x, std::size_t d, const T* w, std::size_t u, const T* dy, T* dw,
                    T* db, T* dx) {
  const auto di = static_cast<Eigen::Index>(d);
  const auto ui = static_cast<Eigen::Index>(u);
  CMapVec<T> dym(dy, ui);
  MapMat<T>(dw, di, ui).noalias() += CMapVec<T>(x, di) * dym.transpose();
  MapVec<T>(db, ui) += dym;
  if (dx != nullptr) MapVec<T>(dx, di).noalias() = CMapMat<T>(w, di, ui) * dym;
}

template <typename T>
void lstm_forward(const T* x, std::size_t d, std::size_t steps, const T* wx, const T* wh,
                  const T* b, std::size_t h, bool reverse, LstmCache<T>& cache) {
  const std::size_t g4 = 4 * h;
  const auto di = static_cast<Eigen::Index>(d);
  const auto ti = static_cast<Eigen::Index>(steps);
  const auto hi = static_cast<Eigen::Index>(h);
  const auto gi = static_cast<Eigen::Index>(g4);
  cache.gates.resize(steps * g4);
  cache.cell.resize(steps * h);
  cache.hidden.resize(steps * h);

  // Input projections for all steps at once: [steps x 4h].
  MapMat<T> z(cache.gates.data(), ti, gi);
  z.noalias() = CMapMat<T>(x, di, ti).transpose() * CMapMat<T>(wx, gi, di).transpose();
  z.rowwise() += CMapVec<T>(b, gi).transpose();

  CMapMat<T> whm(wh, gi, hi);
  Vec<T> rec(gi);
  const T* h_prev = nullptr;
  const T* c_prev = nullptr;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    T* zt = cache.gates.data() + t * g4;
    if (h_prev != nullptr) {
      rec.noalias() = whm * CMapVec<T>(h_prev, hi);
      for (std::size_t j = 0; j < g4; ++j) zt[j] += rec[static_cast<Eigen::Index>(j)];
    }
    T* ct = cache.cell.data() + t * h;
    T* ht = cache.hidden.data() + t * h;
    MapArr<T> z(zt, gi);
    z.head(2 * hi) = z.head(2 * hi).logistic();
    z.segment(2 * hi, hi) = z.segment(2 * hi, hi).tanh();
    z.tail(hi) = z.tail(hi).logistic();
    MapArr<T> c(ct, hi);
    c = z.head(hi) * z.segment(2 * hi, hi);
    if (c_prev != nullptr) c += z.segment(hi, hi) * CMapArr<T>(c_prev, hi);
    MapArr<T>(ht, hi) = z.tail(hi) * c.tanh();
    h_prev = ht;
    c_prev = ct;
  }
}

template <typename T>
void lstm_backward(const T* x, std::size_t d, std::size_t steps, const T* wx, const T* wh,
                   std::size_t h, bool reverse, const LstmCache<T>& cache, const T* d_hidden,
                   const T* d_final, T* dwx, T* dwh, T* db, T* dx) {
  const std::size_t g4 = 4 * h;
  const auto di = static_cast<Eigen::Index>(d);
  const auto ti = static_cast<Eigen::Index>(steps);
  const auto hi = static_cast<Eigen::Index>(h);
  const auto gi = static_cast<Eigen::Index>(g4);

  RowMat<T> dz(ti, gi);            // pre-activation gate gradients, time-major
  RowMat<T> h_prev_rows(ti, hi);   // state fed into each position
  Vec<T> dh_next = Vec<T>::Zero(hi);
  Vec<T> dc_next = Vec<T>::Zero(hi);
  Vec<T> dzt(gi);
  Arr<T> tanh_c(hi);
  CMapMat<T> whm(wh, gi, hi);

  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const bool has_prev = s > 0;
    const std::size_t tp = reverse ? t + 1 : t - 1;  // only valid when has_prev
    const T* gates = cache.gates.data() + t * g4;
    const T* ct = cache.cell.data() + t * h;
    const T* cp = has_prev ? cache.cell.data() + tp * h : nullptr;
    tanh_c = CMapArr<T>(ct, hi).tanh();

    for (std::size_t j = 0; j < h; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      T dh = dh_next[jj];
      if (d_hidden != nullptr) dh += d_hidden[t * h + j];
      if (s == steps - 1 && d_final != nullptr) dh += d_final[j];
      const T ig = gates[j];
      const T fg = gates[h + j];
      const T gg = gates[2 * h + j];
      const T og = gates[3 * h + j];
      const T tc = tanh_c[jj];
      const T dc = dh * og * (T(1) - tc * tc) + dc_next[jj];
      const T c_before = cp != nullptr ? cp[j] : T(0);
      dzt[jj] = dc * gg * ig * (T(1) - ig);
      dzt[static_cast<Eigen::Index>(h + j)] = dc * c_before * fg * (T(1) - fg);
      dzt[static_cast<Eigen::Index>(2 * h + j)] = dc * ig * (T(1) - gg * gg);
      dzt[static_cast<Eigen::Index>(3 * h + j)] = dh * tc * og * (T(1) - og);
      dc_next[jj] = dc * fg;
    }
    dz.row(static_cast<Eigen::Index>(t)) = dzt.transpose();
    if (has_prev) {
      h_prev_rows.row(static_cast<Eigen::Index>(t)) =
          CMapVec<T>(cache.hidden.data() + tp * h, hi).transpose();
      dh_next.noalias() = whm.transpose() * dzt;
    } else {
      h_prev_rows.row(static_cast<Eigen::Index>(t)).setZero();
      dh_next.setZero();
    }
  }

  CMapMat<T> xm(x, di, ti);
  MapMat<T>(dwx, gi, di).noalias() += dz.transpose() * xm.transpose();
  MapMat<T>(dwh, gi, hi).noalias() += dz.transpose() * h_prev_rows;
  MapVec<T>(db, gi) += dz.colwise().sum().transpose();
  if (dx != nullptr) {
    MapMat<T>(dx, di, ti).noalias() = CMapMat<T>(wx, gi, di).transpose() * dz.transpose();
  }
}

template <typename T>
T softmax_xent_forward(const T* logits, std::size_t classes, int label, T* probs) {
  const T peak = *std::max_element(logits, logits + classes);
  T sum = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    probs[c] = std::exp(logits[c] - peak);
    sum += probs[c];
  }
  for (std::size_t c = 0; c < classes; ++c) probs[c] /= sum;
  // log p = (z - peak) - log(sum), exact even when p underflows.
  return -(logits[label] - peak - std::log(sum));
}

template <typename T>
void softmax_xent_backward(const T* probs, std::size_t classes, int label, T scale, T* dlogits) {
  for (std::size_t c = 0; c < classes; ++c) {
    dlogits[c] = scale * (probs[c] - (static_cast<int>(c) == label ? T(1) : T(0)));
  }
}

#define BYTEFAM_INSTANTIATE(T)                                                                   \
  template void conv1d_forward<T>(const T*, std::size_t, std::size_t, const T*, const T*,        \
                                  std::size_t, std::size_t, T*, Buffer<T>&);                \
  template void conv1d_backward<T>(const T*, std::size_t, std::size_t, const T*, std::size_t,    \
                                   std::size_t, const T*, T*, T*, T*, Buffer<T>&,           \
                                   Buffer<T>&);                                             \
  template void relu_forward<T>(T*, std::size_t);                                                \
  template void relu_backward<T>(const T*, T*, std::size_t);                                     \
  template void maxpool_forward<T>(const T*, std::size_t, std::size_t, std::size_t, T*,          \
                                   std::uint32_t*);                                              \
  template void maxpool_backward<T>(const T*, const std::uint32_t*, std::size_t, std::size_t,    \
                                    std::size_t, T*);                                            \
  template void dense_forward<T>(const T*, std::size_t, const T*, const T*, std::size_t, T*);    \
  template void dense_backward<T>(const T*, std::size_t, const T*, std::size_t, const T*, T*,    \
                                  T*, T*);                                                       \
  template void lstm_forward<T>(const T*, std::size_t, std::size_t, const T*, const T*,          \
                                const T*, std::size_t, bool, LstmCache<T>&);                     \
  template void lstm_backward<T>(const T*, std::size_t, std::size_t, const T*, const T*,         \
                                 std::size_t, bool, const LstmCache<T>&, const T*, const T*, T*, \
                                 T*, T*, T*);                                                    \
  template T softmax_xent_forward<T>(const T*, std::size_t, int, T*);                            \
  template void softmax_xent_backward<T>(const T*, std::size_t, int, T, T*);

BYTEFAM_INSTANTIATE(float)
BYTEFAM_INSTANTIATE(double)

#undef BYTEFAM_INSTANTIATE

}  // namespace bytefam::nn::kernels
