#pragma once

// Training loop, k-fold cross-validation, and the final-model protocol.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bytefam/errors.hpp"
#include "bytefam/metrics.hpp"
#include "bytefam/models.hpp"
#include "bytefam/nn/adam.hpp"
#include "bytefam/nn/tensor.hpp"
#include "bytefam/sampling.hpp"

namespace bytefam {

/// Resampled inputs stored row-major, one row of `length` values per sample.
class Dataset {
 public:
  explicit Dataset(std::size_t length = 10'000) : length_(length) {}

  void add(std::string id, std::span<const float> values, int label);
  void reserve(std::size_t n);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t length() const noexcept { return length_; }
  const float* row(std::size_t i) const { return values_.data() + i * length_; }
  std::span<const int> labels() const noexcept { return labels_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  Dataset subset(std::span<const std::size_t> indices) const;
  /// Rows `indices` as an [n x length] tensor.
  nn::Tensor<float> batch(std::span<const std::size_t> indices) const;

 private:
  std::size_t length_;
  nn::Buffer<float> values_;
  std::vector<int> labels_;
  std::vector<std::string> ids_;
};

enum class Precision { Float32, Float64 };

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  SamplerMode sampler = SamplerMode::Rebalance;
  bool quota_batches = false;  ///< fixed per-class quotas instead of per-slot draws
  nn::AdamSettings adam;
  std::uint64_t seed = 1;
  Precision precision = Precision::Float32;
  unsigned threads = 0;
  /// Evaluate the validation split after every epoch (needed for history and
  /// best-epoch selection).
  bool track_validation = true;

  void validate() const;
};

struct TrainHooks {
  /// Called after each epoch; return false to stop training early.
  std::function<bool(const EpochRecord&, const ModelParams<float>&)> on_epoch;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<EpochRecord> history;
  std::size_t selected_epoch = 0;  ///< 1-based epoch whose weights were returned
};

/// Trains a fresh model (config.seed drives init; train.seed drives batches
/// and dropout) on `train_idx`, logging validation metrics on `val_idx`.
/// Returns final-epoch weights. Throws DivergenceError on a non-finite loss.
TrainResult train_fold(const Dataset& data, std::span<const std::size_t> train_idx,
                       std::span<const std::size_t> val_idx, const ModelConfig& model,
                       const TrainConfig& train, const TrainHooks& hooks = {});

/// As train_fold, but returns the epoch snapshot with the lowest validation
/// log-loss (first one on ties).
TrainResult train_best_epoch(const Dataset& data, std::span<const std::size_t> train_idx,
                             std::span<const std::size_t> val_idx, const ModelConfig& model,
                             const TrainConfig& train, const TrainHooks& hooks = {});

/// Wraps a failure inside one CV fold.
class FoldError : public Error {
 public:
  FoldError(std::size_t fold, const std::string& what);
  std::size_t fold() const noexcept { return fold_; }

 private:
  std::size_t fold_;
};

struct CrossValidationResult {
  EvalReport report;  ///< pooled out-of-fold metrics
  FoldAssignment folds;
  nn::Tensor<float> out_of_fold;  ///< [N x classes], row i predicted by the fold model that excluded i
  std::vector<std::vector<EpochRecord>> fold_histories;
};

struct CvHooks {
  std::function<void(std::size_t fold, const EpochRecord&)> on_epoch;
  std::function<void(std::size_t fold, const TrainResult&)> on_fold_done;
};

/// Stratified k folds (seeded by train.seed); fold f trains on the others with
/// seeds derived from (seed, f) and predicts fold f. Metrics are computed once
/// over the pooled predictions.
CrossValidationResult cross_validate(const Dataset& data, const ModelConfig& model,
                                     const TrainConfig& train, std::size_t num_folds = 5,
                                     const CvHooks& hooks = {});

struct FinalModelResult {
  TrainResult training;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  EvalReport validation;  ///< metrics of the selected snapshot on the validation split
};

/// Stratified (1 - val_fraction)/val_fraction split, trains for the full
/// epoch budget, keeps the snapshot with minimum validation log-loss.
FinalModelResult train_final(const Dataset& data, const ModelConfig& model, const TrainConfig& train,
                             double val_fraction = 0.1, const TrainHooks& hooks = {});

/// Probabilities for `indices` of `data` ([n x classes]).
nn::Tensor<float> predict_dataset(const ModelParams<float>& params, const Dataset& data,
                                  std::span<const std::size_t> indices, unsigned threads = 0);

}  // namespace bytefam
