#pragma once

// The three classifier architectures: a 3-layer conv/pool stack followed by
// a dense head (CNN), a forward LSTM (CNN_UNILSTM) or a forward+backward LSTM
// pair (CNN_BILSTM).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bytefam/nn/tensor.hpp"

namespace bytefam {

enum class Architecture { Cnn, CnnUniLstm, CnnBiLstm };

std::string_view to_string(Architecture arch);
/// Accepts "CNN", "CNN_UNILSTM", "CNN_BILSTM" (case-insensitive). Throws ConfigError.
Architecture parse_architecture(std::string_view name);

struct ModelConfig {
  Architecture architecture = Architecture::CnnBiLstm;
  std::size_t input_len = 10'000;
  std::vector<std::size_t> conv_filters = {30, 50, 90};
  std::size_t kernel_width = 7;
  std::size_t pool_width = 5;
  std::size_t dense_units = 256;  ///< CNN head only
  std::size_t lstm_hidden = 128;
  std::size_t num_classes = 9;
  double dropout_dense = 0.5;
  double dropout_lstm = 0.2;
  double l2_lambda = 1e-4;
  std::uint64_t seed = 1;

  static ModelConfig reference(Architecture arch);

  /// Sequence length after each conv and each pool, starting with input_len.
  /// For the reference config: 10000, 9994, 1998, 1992, 398, 392, 78.
  std::vector<std::size_t> length_chain() const;
  std::size_t conv_output_length() const;  ///< last entry of length_chain()
  std::size_t conv_output_channels() const { return conv_filters.back(); }

  /// Throws ConfigError describing the first problem found.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct NamedTensorShape {
  std::string name;
  nn::Shape shape;
};

/// Parameter tensor names and shapes, in storage order, for `config`.
std::vector<NamedTensorShape> parameter_layout(const ModelConfig& config);

/// Named weight tensors plus the config they were built from. Conv weights
/// are [Cout x Cin x K]; dense weights [D x U]; LSTM blocks [4H x D],
/// [4H x H], [4H].
template <typename T>
struct ModelParams {
  ModelConfig config;
  std::vector<std::string> names;
  std::vector<nn::Tensor<T>> tensors;

  nn::Tensor<T>& get(std::string_view name);
  const nn::Tensor<T>& get(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Same layout with every tensor zero; used for gradient buffers.
  ModelParams zeros_like() const;
};

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

/// Glorot-uniform kernels, zero biases, LSTM forget-gate bias 1, all drawn
/// from config.seed. Throws ConfigError for an invalid config.
template <typename T>
ModelParams<T> build_model(const ModelConfig& config);

template <typename T>
std::size_t count_params(const ModelParams<T>& params);

/// Analytic total for `config` without allocating anything.
std::size_t count_params(const ModelConfig& config);

/// Conv kernel tensor names (the tensors the L2 penalty covers).
std::vector<std::string> conv_weight_names(const ModelConfig& config);

template <typename T, typename U>
ModelParams<U> cast_params(const ModelParams<T>& params);

}  // namespace bytefam
