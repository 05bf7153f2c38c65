#include "bytefam/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <variant>

#include "bytefam/errors.hpp"
#include "bytefam/network.hpp"
#include "bytefam/nn/adam.hpp"
#include "bytefam/random.hpp"
#include "float_env.hpp"

namespace bytefam {

void Dataset::add(std::string id, std::span<const float> values, int label) {
  if (values.size() != length_) {
    throw ShapeError("sample '" + id + "' has " + std::to_string(values.size()) +
                     " values, dataset rows hold " + std::to_string(length_));
  }
  values_.insert(values_.end(), values.begin(), values.end());
  labels_.push_back(label);
  ids_.push_back(std::move(id));
}

void Dataset::reserve(std::size_t n) {
  values_.reserve(n * length_);
  labels_.reserve(n);
  ids_.reserve(n);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(length_);
  out.reserve(indices.size());
  for (auto i : indices) out.add(ids_.at(i), {row(i), length_}, labels_.at(i));
  return out;
}

nn::Tensor<float> Dataset::batch(std::span<const std::size_t> indices) const {
  nn::Tensor<float> out({std::max<std::size_t>(indices.size(), 1), length_});
  if (indices.empty()) throw ArgumentError("empty batch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    std::copy_n(row(indices[k]), length_, out.ptr() + k * length_);
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

FoldError::FoldError(std::size_t fold, const std::string& what)
    : Error("fold " + std::to_string(fold) + ": " + what), fold_(fold) {}

namespace {

// Row pointers of precision T for a set of dataset positions. Float rows
// point straight into the dataset; double rows are converted into `storage`.
template <typename T>
std::vector<const T*> gather_rows(const Dataset& data, std::span<const std::size_t> idx,
                                  std::vector<T>& storage) {
  std::vector<const T*> rows;
  rows.reserve(idx.size());
  if constexpr (std::is_same_v<T, float>) {
    for (auto i : idx) rows.push_back(data.row(i));
  } else {
    const std::size_t len = data.length();
    storage.resize(idx.size() * len);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::copy_n(data.row(idx[k]), len, storage.data() + k * len);
      rows.push_back(storage.data() + k * len);
    }
  }
  return rows;
}

template <typename T>
nn::Tensor<float> predict_impl(const ModelParams<T>& params, const Dataset& data,
                               std::span<const std::size_t> indices, unsigned threads) {
  const std::size_t classes = params.config.num_classes;
  nn::Tensor<float> out({std::max<std::size_t>(indices.size(), 1), classes});
  if (indices.empty()) return out;
  Network<T> net(params, threads);
  std::vector<T> storage;
  constexpr std::size_t kSlice = 64;
  for (std::size_t begin = 0; begin < indices.size(); begin += kSlice) {
    const std::size_t end = std::min(indices.size(), begin + kSlice);
    const auto rows = gather_rows<T>(data, indices.subspan(begin, end - begin), storage);
    const auto& probs = net.forward(rows, nn::Mode::Infer);
    for (std::size_t j = 0; j < probs.size(); ++j) {
      out[begin * classes + j] = static_cast<float>(probs[j]);
    }
  }
  return out;
}

template <typename T>
TrainResult train_impl(const Dataset& data, std::span<const std::size_t> train_idx,
                       std::span<const std::size_t> val_idx, const ModelConfig& model,
                       const TrainConfig& train, const TrainHooks& hooks, bool keep_best) {
  train.validate();
  model.validate();
  if (data.length() != model.input_len) {
    throw ConfigError("dataset rows have length " + std::to_string(data.length()) +
                      " but the model expects " + std::to_string(model.input_len));
  }
  if (train_idx.empty()) throw ConfigError("training split is empty");
  for (auto i : train_idx) {
    const int label = data.labels()[i];
    if (label < 0 || static_cast<std::size_t>(label) >= model.num_classes) {
      throw ConfigError("label " + std::to_string(label) + " outside the model's classes");
    }
  }
  if (keep_best && val_idx.empty()) throw ConfigError("best-epoch selection needs a validation split");

  auto params = build_model<T>(model);
  nn::AdamState<T> adam;
  adam.settings = train.adam;
  Network<T> net(params, train.threads);

  const std::uint64_t batch_seed = derive_seed(train.seed, {0xBA7C});
  std::variant<DefaultBatcher, RebalancedBatcher> batcher =
      train.sampler == SamplerMode::Default
          ? std::variant<DefaultBatcher, RebalancedBatcher>(
                DefaultBatcher({train_idx.begin(), train_idx.end()}, train.batch_size, batch_seed))
          : std::variant<DefaultBatcher, RebalancedBatcher>(
                RebalancedBatcher(data.labels(), train_idx, model.num_classes, train.batch_size,
                                  batch_seed, train.quota_batches));


  std::vector<nn::Tensor<T>*> param_ptrs;
  for (auto& t : params.tensors) param_ptrs.push_back(&t);

  TrainResult result;
  std::optional<ModelParams<float>> best;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<T> storage;
  std::vector<int> labels;
  const auto val_labels = [&] {
    std::vector<int> v;
    for (auto i : val_idx) v.push_back(data.labels()[i]);
    return v;
  }();

  const detail::DenormalGuard guard;
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    const auto batches = std::visit([&](const auto& b) { return b.epoch(epoch); }, batcher);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b].indices;
      const auto rows = gather_rows<T>(data, idx, storage);
      labels.clear();
      for (auto i : idx) labels.push_back(data.labels()[i]);

      const auto& probs = net.forward(rows, nn::Mode::Train, derive_seed(train.seed, {0xD809, epoch, b}));
      const double loss = static_cast<double>(net.loss(labels));
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                              std::to_string(b + 1));
      }
      const auto predicted = argmax_rows(probs);
      for (std::size_t k = 0; k < idx.size(); ++k) correct += predicted[k] == labels[k] ? 1 : 0;
      loss_sum += loss * static_cast<double>(idx.size());
      seen += idx.size();

      const auto grads = net.backward(labels);
      std::vector<const nn::Tensor<T>*> grad_ptrs;
      for (const auto& g : grads.tensors) grad_ptrs.push_back(&g);
      nn::adam_step<T>(param_ptrs, grad_ptrs, adam);
    }

    EpochRecord record;
    record.epoch = epoch + 1;
    record.train_loss = loss_sum / static_cast<double>(seen);
    record.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    if (train.track_validation && !val_idx.empty()) {
      const auto probs = predict_impl(params, data, val_idx, train.threads);
      const auto report = compute_metrics(probs, val_labels);
      record.val_loss = report.avg_log_loss;
      record.val_acc = report.micro_accuracy;
    } else {
      record.val_loss = std::numeric_limits<double>::quiet_NaN();
      record.val_acc = std::numeric_limits<double>::quiet_NaN();
    }
    result.history.push_back(record);

    const bool want_snapshot = keep_best && record.val_loss < best_loss;
    const bool need_float = want_snapshot || static_cast<bool>(hooks.on_epoch);
    std::optional<ModelParams<float>> current;
    if (need_float) current = cast_params<T, float>(params);
    if (want_snapshot) {
      best_loss = record.val_loss;
      best = *current;
      result.selected_epoch = record.epoch;
    }
    if (hooks.on_epoch && !hooks.on_epoch(record, *current)) break;
  }

  if (keep_best && best) {
    result.params = std::move(*best);
  } else {
    result.params = cast_params<T, float>(params);
    result.selected_epoch = result.history.size();
  }
  return result;
}

template <typename... Args>
TrainResult dispatch(Precision precision, Args&&... args) {
  if (precision == Precision::Float64) return train_impl<double>(std::forward<Args>(args)...);
  return train_impl<float>(std::forward<Args>(args)...);
}

}  // namespace

TrainResult train_fold(const Dataset& data, std::span<const std::size_t> train_idx,
                       std::span<const std::size_t> val_idx, const ModelConfig& model,
                       const TrainConfig& train, const TrainHooks& hooks) {
  return dispatch(train.precision, data, train_idx, val_idx, model, train, hooks, false);
}

TrainResult train_best_epoch(const Dataset& data, std::span<const std::size_t> train_idx,
                             std::span<const std::size_t> val_idx, const ModelConfig& model,
                             const TrainConfig& train, const TrainHooks& hooks) {
  TrainConfig t = train;
  t.track_validation = true;
  return dispatch(t.precision, data, train_idx, val_idx, model, t, hooks, true);
}

nn::Tensor<float> predict_dataset(const ModelParams<float>& params, const Dataset& data,
                                  std::span<const std::size_t> indices, unsigned threads) {
  return predict_impl(params, data, indices, threads);
}

CrossValidationResult cross_validate(const Dataset& data, const ModelConfig& model,
                                     const TrainConfig& train, std::size_t num_folds,
                                     const CvHooks& hooks) {
  CrossValidationResult cv;
  cv.folds = stratified_folds(data.labels(), num_folds, train.seed);
  const std::size_t classes = model.num_classes;
  cv.out_of_fold = nn::Tensor<float>({std::max<std::size_t>(data.size(), 1), classes});
  std::vector<bool> covered(data.size(), false);

  for (std::size_t f = 0; f < num_folds; ++f) {
    const auto val_idx = cv.folds.fold_indices(static_cast<int>(f));
    const auto train_idx = cv.folds.train_indices(static_cast<int>(f));
    if (val_idx.empty()) continue;
    ModelConfig fold_model = model;
    fold_model.seed = derive_seed(model.seed, {0xF0, f});
    TrainConfig fold_train = train;
    fold_train.seed = derive_seed(train.seed, {0xF1, f});
    TrainHooks fold_hooks;
    if (hooks.on_epoch) {
      fold_hooks.on_epoch = [&, f](const EpochRecord& r, const ModelParams<float>&) {
        hooks.on_epoch(f, r);
        return true;
      };
    }
    TrainResult trained;
    try {
      trained = train_fold(data, train_idx, val_idx, fold_model, fold_train, fold_hooks);
    } catch (const Error& e) {
      throw FoldError(f, e.what());
    }
    const auto probs = predict_dataset(trained.params, data, val_idx, train.threads);
    for (std::size_t k = 0; k < val_idx.size(); ++k) {
      std::copy_n(probs.ptr() + k * classes, classes, cv.out_of_fold.ptr() + val_idx[k] * classes);
      covered[val_idx[k]] = true;
    }
    cv.fold_histories.push_back(trained.history);
    if (hooks.on_fold_done) hooks.on_fold_done(f, trained);
  }

  if (!std::all_of(covered.begin(), covered.end(), [](bool c) { return c; })) {
    throw StateError("some samples received no out-of-fold prediction");
  }
  if (data.size() > 0) cv.report = compute_metrics(cv.out_of_fold, data.labels());
  return cv;
}

FinalModelResult train_final(const Dataset& data, const ModelConfig& model, const TrainConfig& train,
                             double val_fraction, const TrainHooks& hooks) {
  FinalModelResult out;
  out.val_indices = stratified_subsample(data.labels(), val_fraction, derive_seed(train.seed, {0x90}));
  std::vector<bool> is_val(data.size(), false);
  for (auto i : out.val_indices) is_val[i] = true;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!is_val[i]) out.train_indices.push_back(i);
  }
  out.training = train_best_epoch(data, out.train_indices, out.val_indices, model, train, hooks);
  const auto probs = predict_dataset(out.training.params, data, out.val_indices, train.threads);
  std::vector<int> labels;
  for (auto i : out.val_indices) labels.push_back(data.labels()[i]);
  out.validation = compute_metrics(probs, labels);
  out.validation.history = out.training.history;
  return out;
}

}  // namespace bytefam
