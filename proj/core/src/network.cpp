#include "bytefam/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "bytefam/errors.hpp"
#include "bytefam/nn/kernels.hpp"
#include "bytefam/parallel.hpp"
#include "bytefam/random.hpp"
#include "float_env.hpp"

namespace bytefam {

namespace k = nn::kernels;

namespace {
constexpr std::size_t kMaxChunks = 8;
}

template <typename T>
struct Network<T>::Impl {
  struct Sample {
    const T* input = nullptr;
    std::vector<nn::Buffer<T>> activ;   // post-ReLU conv outputs
    std::vector<nn::Buffer<T>> pooled;
    std::vector<std::vector<std::uint32_t>> argmax;
    std::array<k::LstmCache<T>, 2> lstm;
    nn::Buffer<T> hidden;    // CNN dense layer, post-ReLU
    nn::Buffer<T> features;  // head input before dropout
    nn::Buffer<T> mask;
    nn::Buffer<T> head_in;
  };

  struct Workspace {
    nn::Buffer<T> col, dcol;
    nn::Buffer<T> dlogits, dhead, dfeat, dflat, dx_b, dact, dprev;
    ModelParams<T> grads;
  };

  explicit Impl(const ModelParams<T>& p) : params(&p), cfg(p.config) {
    cfg.validate();
    chain = cfg.length_chain();
    const auto layout = parameter_layout(cfg);
    if (layout.size() != p.tensors.size()) throw ShapeError("model tensors do not match config layout");
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (layout[i].name != p.names[i] || layout[i].shape != p.tensors[i].shape()) {
        throw ShapeError("tensor '" + p.names[i] + "' does not match the config layout");
      }
    }
    for (std::size_t i = 0; i < cfg.conv_filters.size(); ++i) {
      const auto prefix = "conv" + std::to_string(i + 1);
      conv_w.push_back(*p.index_of(prefix + ".weight"));
      conv_b.push_back(*p.index_of(prefix + ".bias"));
    }
    if (cfg.architecture == Architecture::Cnn) {
      dense_w = *p.index_of("dense.weight");
      dense_b = *p.index_of("dense.bias");
    } else {
      const int dirs = cfg.architecture == Architecture::CnnBiLstm ? 2 : 1;
      for (int d = 0; d < dirs; ++d) {
        const std::string prefix = d == 0 ? "lstm_fwd" : "lstm_bwd";
        lstm[d] = {*p.index_of(prefix + ".input_weights"), *p.index_of(prefix + ".recurrent_weights"),
                   *p.index_of(prefix + ".bias")};
      }
      directions = dirs;
    }
    out_w = *p.index_of("output.weight");
    out_b = *p.index_of("output.bias");
    feature_width = p.tensors[out_w].dim(0);
  }

  const T* w(std::size_t i) const { return params->tensors[i].ptr(); }

  std::size_t conv_layers() const { return cfg.conv_filters.size(); }
  std::size_t conv_len(std::size_t layer) const { return chain[2 * layer + 1]; }
  std::size_t pool_len(std::size_t layer) const { return chain[2 * layer + 2]; }
  std::size_t in_len(std::size_t layer) const { return chain[2 * layer]; }
  std::size_t in_channels(std::size_t layer) const { return layer == 0 ? 1 : cfg.conv_filters[layer - 1]; }
  double head_dropout() const {
    return cfg.architecture == Architecture::Cnn ? cfg.dropout_dense : cfg.dropout_lstm;
  }

  void forward_sample(Sample& s, Workspace& ws, nn::Mode mode, std::uint64_t stream, T* logit_row) const {
    const std::size_t layers = conv_layers();
    s.activ.resize(layers);
    s.pooled.resize(layers);
    s.argmax.resize(layers);
    const T* x = s.input;
    for (std::size_t i = 0; i < layers; ++i) {
      const std::size_t cin = in_channels(i), cout = cfg.conv_filters[i];
      s.activ[i].resize(cout * conv_len(i));
      k::conv1d_forward(x, cin, in_len(i), w(conv_w[i]), w(conv_b[i]), cout, cfg.kernel_width,
                        s.activ[i].data(), ws.col);
      k::relu_forward(s.activ[i].data(), s.activ[i].size());
      s.pooled[i].resize(cout * pool_len(i));
      s.argmax[i].resize(cout * pool_len(i));
      k::maxpool_forward(s.activ[i].data(), cout, conv_len(i), cfg.pool_width, s.pooled[i].data(),
                         s.argmax[i].data());
      x = s.pooled[i].data();
    }

    const std::size_t channels = cfg.conv_output_channels();
    const std::size_t steps = chain.back();
    if (cfg.architecture == Architecture::Cnn) {
      s.hidden.resize(cfg.dense_units);
      k::dense_forward(x, channels * steps, w(dense_w), w(dense_b), cfg.dense_units, s.hidden.data());
      k::relu_forward(s.hidden.data(), s.hidden.size());
      s.features = s.hidden;
    } else {
      const std::size_t h = cfg.lstm_hidden;
      s.features.resize(feature_width);
      for (int d = 0; d < directions; ++d) {
        const bool reverse = d == 1;
        k::lstm_forward(x, channels, steps, w(lstm[d][0]), w(lstm[d][1]), w(lstm[d][2]), h, reverse,
                        s.lstm[d]);
        const std::size_t last = reverse ? 0 : steps - 1;
        std::copy_n(s.lstm[d].hidden.begin() + static_cast<std::ptrdiff_t>(last * h), h,
                    s.features.begin() + static_cast<std::ptrdiff_t>(d * h));
      }
    }

    s.mask.assign(feature_width, T(1));
    const double rate = head_dropout();
    if (mode == nn::Mode::Train && rate > 0.0) {
      Rng rng(stream);
      nn::fill_dropout_mask(std::span<T>(s.mask), rate, rng);
    }
    s.head_in.resize(feature_width);
    for (std::size_t j = 0; j < feature_width; ++j) s.head_in[j] = s.features[j] * s.mask[j];
    k::dense_forward(s.head_in.data(), feature_width, w(out_w), w(out_b), cfg.num_classes, logit_row);
  }

  void backward_sample(const Sample& s, Workspace& ws, const T* prob_row, int label, T scale) const {
    auto& g = ws.grads.tensors;
    const std::size_t classes = cfg.num_classes;
    ws.dlogits.resize(classes);
    k::softmax_xent_backward(prob_row, classes, label, scale, ws.dlogits.data());
    ws.dhead.resize(feature_width);
    k::dense_backward(s.head_in.data(), feature_width, w(out_w), classes, ws.dlogits.data(),
                      g[out_w].ptr(), g[out_b].ptr(), ws.dhead.data());
    ws.dfeat.resize(feature_width);
    for (std::size_t j = 0; j < feature_width; ++j) ws.dfeat[j] = ws.dhead[j] * s.mask[j];

    const std::size_t layers = conv_layers();
    const std::size_t channels = cfg.conv_output_channels();
    const std::size_t steps = chain.back();
    const T* top = s.pooled[layers - 1].data();
    ws.dflat.resize(channels * steps);
    if (cfg.architecture == Architecture::Cnn) {
      k::relu_backward(s.hidden.data(), ws.dfeat.data(), ws.dfeat.size());
      k::dense_backward(top, channels * steps, w(dense_w), cfg.dense_units, ws.dfeat.data(),
                        g[dense_w].ptr(), g[dense_b].ptr(), ws.dflat.data());
    } else {
      const std::size_t h = cfg.lstm_hidden;
      for (int d = 0; d < directions; ++d) {
        T* dx = d == 0 ? ws.dflat.data() : (ws.dx_b.resize(channels * steps), ws.dx_b.data());
        k::lstm_backward(top, channels, steps, w(lstm[d][0]), w(lstm[d][1]), h, d == 1, s.lstm[d],
                         static_cast<const T*>(nullptr), ws.dfeat.data() + d * h, g[lstm[d][0]].ptr(), g[lstm[d][1]].ptr(),
                         g[lstm[d][2]].ptr(), dx);
      }
      if (directions == 2) {
        for (std::size_t j = 0; j < ws.dflat.size(); ++j) ws.dflat[j] += ws.dx_b[j];
      }
    }

    // ws.dflat holds the gradient of the last pooled output.
    nn::Buffer<T>* dpool = &ws.dflat;
    for (std::size_t i = layers; i-- > 0;) {
      const std::size_t cin = in_channels(i), cout = cfg.conv_filters[i];
      ws.dact.resize(cout * conv_len(i));
      k::maxpool_backward(dpool->data(), s.argmax[i].data(), cout, conv_len(i), cfg.pool_width,
                          ws.dact.data());
      k::relu_backward(s.activ[i].data(), ws.dact.data(), ws.dact.size());
      const T* in = i == 0 ? s.input : s.pooled[i - 1].data();
      T* dx = nullptr;
      if (i > 0) {
        ws.dprev.resize(cin * in_len(i));
        dx = ws.dprev.data();
      }
      k::conv1d_backward(in, cin, in_len(i), w(conv_w[i]), cout, cfg.kernel_width, ws.dact.data(),
                         g[conv_w[i]].ptr(), g[conv_b[i]].ptr(), dx, ws.col, ws.dcol);
      if (i > 0) {
        std::swap(ws.dflat, ws.dprev);
        dpool = &ws.dflat;
      }
    }
  }

  std::pair<std::size_t, std::size_t> chunk_range(std::size_t c, std::size_t chunks) const {
    return {c * batch / chunks, (c + 1) * batch / chunks};
  }

  const ModelParams<T>* params;
  ModelConfig cfg;
  std::vector<std::size_t> chain;
  std::vector<std::size_t> conv_w, conv_b;
  std::size_t dense_w = 0, dense_b = 0, out_w = 0, out_b = 0;
  std::array<std::array<std::size_t, 3>, 2> lstm{};
  int directions = 0;
  std::size_t feature_width = 0;

  std::vector<Sample> samples;
  std::vector<Workspace> workspaces;
  nn::Tensor<T> logits, probs;
  std::size_t batch = 0;
  bool recorded = false;
};

template <typename T>
Network<T>::Network(const ModelParams<T>& params, unsigned threads)
    : impl_(std::make_unique<Impl>(params)), threads_(threads) {}

template <typename T>
Network<T>::~Network() = default;
template <typename T>
Network<T>::Network(Network&&) noexcept = default;
template <typename T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <typename T>
std::size_t Network<T>::chunk_count(std::size_t n) {
  return std::max<std::size_t>(1, std::min(n, kMaxChunks));
}

template <typename T>
const nn::Tensor<T>& Network<T>::forward(std::span<const T* const> rows, nn::Mode mode,
                                         std::uint64_t dropout_seed) {
  auto& m = *impl_;
  const std::size_t n = rows.size();
  if (n == 0) throw ShapeError("forward needs at least one sample");
  m.batch = n;
  m.recorded = false;
  if (m.samples.size() < n) m.samples.resize(n);
  const std::size_t chunks = chunk_count(n);
  if (m.workspaces.size() < chunks) m.workspaces.resize(chunks);
  const std::size_t classes = m.cfg.num_classes;
  if (m.logits.empty() || m.logits.dim(0) != n) {
    m.logits = nn::Tensor<T>({n, classes});
    m.probs = nn::Tensor<T>({n, classes});
  }
  for (std::size_t i = 0; i < n; ++i) m.samples[i].input = rows[i];

  parallel_for(chunks, threads_, [&](std::size_t c) {
    const detail::DenormalGuard guard;
    const auto [begin, end] = m.chunk_range(c, chunks);
    for (std::size_t i = begin; i < end; ++i) {
      T* logit_row = m.logits.ptr() + i * classes;
      m.forward_sample(m.samples[i], m.workspaces[c], mode, derive_seed(dropout_seed, {i}), logit_row);
      std::copy_n(logit_row, classes, m.probs.ptr() + i * classes);
      // softmax in place
      const T peak = *std::max_element(logit_row, logit_row + classes);
      T sum = 0;
      T* p = m.probs.ptr() + i * classes;
      for (std::size_t j = 0; j < classes; ++j) sum += (p[j] = std::exp(p[j] - peak));
      for (std::size_t j = 0; j < classes; ++j) p[j] /= sum;
    }
  });
  m.recorded = true;
  return m.probs;
}

template <typename T>
const nn::Tensor<T>& Network<T>::probabilities() const {
  if (!impl_->recorded) throw StateError("no forward pass recorded");
  return impl_->probs;
}

template <typename T>
const nn::Tensor<T>& Network<T>::logits() const {
  if (!impl_->recorded) throw StateError("no forward pass recorded");
  return impl_->logits;
}

template <typename T>
T Network<T>::data_loss(std::span<const int> labels) const {
  const auto& m = *impl_;
  if (!m.recorded) throw StateError("no forward pass recorded");
  if (labels.size() != m.batch) throw ArgumentError("one label per sample is required");
  const std::size_t classes = m.cfg.num_classes;
  double total = 0.0;
  for (std::size_t i = 0; i < m.batch; ++i) {
    if (labels[i] < 0 || labels[i] >= static_cast<int>(classes)) throw ArgumentError("label out of range");
    const T* z = m.logits.ptr() + i * classes;
    const T peak = *std::max_element(z, z + classes);
    T sum = 0;
    for (std::size_t j = 0; j < classes; ++j) sum += std::exp(z[j] - peak);
    total += -static_cast<double>(z[labels[i]] - peak - std::log(sum));
  }
  return static_cast<T>(total / static_cast<double>(m.batch));
}

template <typename T>
T Network<T>::loss(std::span<const int> labels) const {
  const auto& m = *impl_;
  std::vector<const nn::Tensor<T>*> conv;
  for (auto i : m.conv_w) conv.push_back(&m.params->tensors[i]);
  return data_loss(labels) + nn::l2_penalty<T>(conv, m.cfg.l2_lambda);
}

template <typename T>
ModelParams<T> Network<T>::backward(std::span<const int> labels) {
  auto& m = *impl_;
  if (!m.recorded) throw StateError("backward called before forward");
  if (labels.size() != m.batch) throw ArgumentError("one label per sample is required");
  for (int label : labels) {
    if (label < 0 || label >= static_cast<int>(m.cfg.num_classes)) throw ArgumentError("label out of range");
  }
  const std::size_t chunks = chunk_count(m.batch);
  const std::size_t classes = m.cfg.num_classes;
  const T scale = T(1) / static_cast<T>(m.batch);
  parallel_for(chunks, threads_, [&](std::size_t c) {
    const detail::DenormalGuard guard;
    auto& ws = m.workspaces[c];
    if (ws.grads.tensors.empty()) {
      ws.grads = m.params->zeros_like();
    } else {
      for (auto& t : ws.grads.tensors) t.fill(T(0));
    }
    const auto [begin, end] = m.chunk_range(c, chunks);
    for (std::size_t i = begin; i < end; ++i) {
      m.backward_sample(m.samples[i], ws, m.probs.ptr() + i * classes, labels[i], scale);
    }
  });

  ModelParams<T> grads = m.workspaces[0].grads;
  for (std::size_t c = 1; c < chunks; ++c) {
    for (std::size_t t = 0; t < grads.tensors.size(); ++t) {
      T* dst = grads.tensors[t].ptr();
      const T* src = m.workspaces[c].grads.tensors[t].ptr();
      for (std::size_t j = 0; j < grads.tensors[t].size(); ++j) dst[j] += src[j];
    }
  }
  for (auto i : m.conv_w) nn::add_l2_gradient(m.params->tensors[i], m.cfg.l2_lambda, grads.tensors[i]);
  return grads;
}

template <typename T>
nn::Tensor<T> predict_proba(const ModelParams<T>& params, const nn::Tensor<T>& batch, unsigned threads) {
  nn::require_rank(batch, 2, "prediction batch");
  const std::size_t len = params.config.input_len;
  if (batch.dim(1) != len) {
    throw ShapeError("prediction inputs must have length " + std::to_string(len) + ", got " +
                     std::to_string(batch.dim(1)));
  }
  const std::size_t n = batch.dim(0);
  const std::size_t classes = params.config.num_classes;
  nn::Tensor<T> out({n, classes});
  Network<T> net(params, threads);
  constexpr std::size_t kSlice = 64;
  std::vector<const T*> rows;
  for (std::size_t begin = 0; begin < n; begin += kSlice) {
    const std::size_t end = std::min(n, begin + kSlice);
    rows.clear();
    for (std::size_t i = begin; i < end; ++i) rows.push_back(batch.ptr() + i * len);
    const auto& probs = net.forward(rows, nn::Mode::Infer);
    std::copy(probs.data().begin(), probs.data().end(), out.ptr() + begin * classes);
  }
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const nn::Tensor<T>& probabilities) {
  nn::require_rank(probabilities, 2, "probabilities");
  const std::size_t n = probabilities.dim(0), c = probabilities.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = probabilities.ptr() + i * c;
    out[i] = static_cast<int>(std::max_element(row, row + c) - row);  // first max
  }
  return out;
}

template <typename T>
std::vector<int> predict_class(const ModelParams<T>& params, const nn::Tensor<T>& batch, unsigned threads) {
  return argmax_rows(predict_proba(params, batch, threads));
}

template class Network<float>;
template class Network<double>;
template nn::Tensor<float> predict_proba(const ModelParams<float>&, const nn::Tensor<float>&, unsigned);
template nn::Tensor<double> predict_proba(const ModelParams<double>&, const nn::Tensor<double>&, unsigned);
template std::vector<int> argmax_rows(const nn::Tensor<float>&);
template std::vector<int> argmax_rows(const nn::Tensor<double>&);
template std::vector<int> predict_class(const ModelParams<float>&, const nn::Tensor<float>&, unsigned);
template std::vector<int> predict_class(const ModelParams<double>&, const nn::Tensor<double>&, unsigned);

}  // namespace bytefam
