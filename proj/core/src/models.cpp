#include "bytefam/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "bytefam/errors.hpp"
#include "bytefam/random.hpp"

namespace bytefam {

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::Cnn: return "CNN";
    case Architecture::CnnUniLstm: return "CNN_UNILSTM";
    case Architecture::CnnBiLstm: return "CNN_BILSTM";
  }
  return "?";
}

Architecture parse_architecture(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  std::replace(upper.begin(), upper.end(), '-', '_');
  if (upper == "CNN") return Architecture::Cnn;
  if (upper == "CNN_UNILSTM") return Architecture::CnnUniLstm;
  if (upper == "CNN_BILSTM") return Architecture::CnnBiLstm;
  throw ConfigError("unknown architecture '" + std::string(name) +
                    "' (expected CNN, CNN_UNILSTM or CNN_BILSTM)");
}

ModelConfig ModelConfig::reference(Architecture arch) {
  ModelConfig c;
  c.architecture = arch;
  return c;
}

std::vector<std::size_t> ModelConfig::length_chain() const {
  std::vector<std::size_t> chain{input_len};
  std::size_t len = input_len;
  for (std::size_t i = 0; i < conv_filters.size(); ++i) {
    if (kernel_width == 0 || len < kernel_width) {
      throw ConfigError("conv layer " + std::to_string(i + 1) + " input length " +
                        std::to_string(len) + " is shorter than kernel width " +
                        std::to_string(kernel_width));
    }
    len = len - kernel_width + 1;
    chain.push_back(len);
    if (pool_width == 0 || len < pool_width) {
      throw ConfigError("pool after conv layer " + std::to_string(i + 1) + " sees length " +
                        std::to_string(len) + " < pool width " + std::to_string(pool_width));
    }
    len /= pool_width;
    chain.push_back(len);
  }
  return chain;
}

std::size_t ModelConfig::conv_output_length() const { return length_chain().back(); }

void ModelConfig::validate() const {
  if (conv_filters.empty()) throw ConfigError("at least one conv layer is required");
  for (auto f : conv_filters) {
    if (f == 0) throw ConfigError("conv filter counts must be positive");
  }
  if (input_len == 0) throw ConfigError("input_len must be positive");
  (void)length_chain();
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (architecture == Architecture::Cnn && dense_units == 0) throw ConfigError("dense_units must be positive");
  if (architecture != Architecture::Cnn && lstm_hidden == 0) throw ConfigError("lstm_hidden must be positive");
  auto check_rate = [](double r, const char* what) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError(std::string(what) + " must be in [0, 1)");
  };
  check_rate(dropout_dense, "dropout_dense");
  check_rate(dropout_lstm, "dropout_lstm");
  if (!(l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be non-negative");
}

std::vector<NamedTensorShape> parameter_layout(const ModelConfig& config) {
  config.validate();
  std::vector<NamedTensorShape> layout;
  std::size_t cin = 1;
  for (std::size_t i = 0; i < config.conv_filters.size(); ++i) {
    const auto cout = config.conv_filters[i];
    const auto prefix = "conv" + std::to_string(i + 1);
    layout.push_back({prefix + ".weight", {cout, cin, config.kernel_width}});
    layout.push_back({prefix + ".bias", {cout}});
    cin = cout;
  }
  const std::size_t features = cin;
  const std::size_t h = config.lstm_hidden;
  const std::size_t k = config.num_classes;
  switch (config.architecture) {
    case Architecture::Cnn: {
      const std::size_t flat = features * config.conv_output_length();
      layout.push_back({"dense.weight", {flat, config.dense_units}});
      layout.push_back({"dense.bias", {config.dense_units}});
      layout.push_back({"output.weight", {config.dense_units, k}});
      layout.push_back({"output.bias", {k}});
      break;
    }
    case Architecture::CnnUniLstm:
    case Architecture::CnnBiLstm: {
      const bool bi = config.architecture == Architecture::CnnBiLstm;
      for (const char* dir : {"lstm_fwd", "lstm_bwd"}) {
        if (!bi && std::string_view(dir) == "lstm_bwd") break;
        layout.push_back({std::string(dir) + ".input_weights", {4 * h, features}});
        layout.push_back({std::string(dir) + ".recurrent_weights", {4 * h, h}});
        layout.push_back({std::string(dir) + ".bias", {4 * h}});
      }
      layout.push_back({"output.weight", {bi ? 2 * h : h, k}});
      layout.push_back({"output.bias", {k}});
      break;
    }
  }
  return layout;
}

std::vector<std::string> conv_weight_names(const ModelConfig& config) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < config.conv_filters.size(); ++i) {
    names.push_back("conv" + std::to_string(i + 1) + ".weight");
  }
  return names;
}

std::size_t count_params(const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& entry : parameter_layout(config)) total += nn::shape_size(entry.shape);
  return total;
}

template <typename T>
std::optional<std::size_t> ModelParams<T>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

template <typename T>
nn::Tensor<T>& ModelParams<T>::get(std::string_view name) {
  const auto i = index_of(name);
  if (!i) throw ArgumentError("model has no tensor named '" + std::string(name) + "'");
  return tensors[*i];
}

template <typename T>
const nn::Tensor<T>& ModelParams<T>::get(std::string_view name) const {
  const auto i = index_of(name);
  if (!i) throw ArgumentError("model has no tensor named '" + std::string(name) + "'");
  return tensors[*i];
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams z;
  z.config = config;
  z.names = names;
  z.tensors.reserve(tensors.size());
  for (const auto& t : tensors) z.tensors.emplace_back(t.shape());
  return z;
}

namespace {

// Glorot fan sizes for each named tensor kind.
std::pair<std::size_t, std::size_t> fans(const std::string& name, const nn::Shape& shape) {
  if (name.rfind("conv", 0) == 0) return {shape[1] * shape[2], shape[0] * shape[2]};
  if (name.find("_weights") != std::string::npos) return {shape[1], shape[0]};  // LSTM [4H x in]
  return {shape[0], shape[1]};                                                   // dense [D x U]
}

bool is_bias(const std::string& name) {
  return name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
}

}  // namespace

template <typename T>
ModelParams<T> build_model(const ModelConfig& config) {
  ModelParams<T> params;
  params.config = config;
  Rng rng(derive_seed(config.seed, {0x1A17}));
  for (const auto& entry : parameter_layout(config)) {
    nn::Tensor<T> t(entry.shape);
    if (is_bias(entry.name)) {
      if (entry.name.rfind("lstm_", 0) == 0) {
        const std::size_t h = entry.shape[0] / 4;
        for (std::size_t j = h; j < 2 * h; ++j) t[j] = T(1);  // forget gate
      }
    } else {
      const auto [fan_in, fan_out] = fans(entry.name, entry.shape);
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : t.data()) v = static_cast<T>(uniform_real(rng, -limit, limit));
    }
    params.names.push_back(entry.name);
    params.tensors.push_back(std::move(t));
  }
  return params;
}

template <typename T>
std::size_t count_params(const ModelParams<T>& params) {
  std::size_t total = 0;
  for (const auto& t : params.tensors) total += t.size();
  return total;
}

template <typename T, typename U>
ModelParams<U> cast_params(const ModelParams<T>& params) {
  ModelParams<U> out;
  out.config = params.config;
  out.names = params.names;
  for (const auto& t : params.tensors) {
    std::vector<U> data(t.data().begin(), t.data().end());
    out.tensors.emplace_back(t.shape(), std::move(data));
  }
  return out;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> build_model<float>(const ModelConfig&);
template ModelParams<double> build_model<double>(const ModelConfig&);
template std::size_t count_params(const ModelParams<float>&);
template std::size_t count_params(const ModelParams<double>&);
template ModelParams<double> cast_params<float, double>(const ModelParams<float>&);
template ModelParams<float> cast_params<double, float>(const ModelParams<double>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);

}  // namespace bytefam
