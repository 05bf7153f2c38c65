#pragma once

// Stratified fold assignment and the two training batch generators.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bytefam {

/// fold_of[i] is the fold of sample position i.
struct FoldAssignment {
  std::size_t num_folds = 5;
  std::vector<int> fold_of;
  std::vector<std::string> warnings;

  std::vector<std::size_t> fold_indices(int fold) const;
  /// Every position not in `fold`.
  std::vector<std::size_t> train_indices(int fold) const;
  std::vector<std::size_t> fold_sizes() const;
};

/// Within each class (ascending class index) samples are shuffled by `seed`
/// and dealt round-robin; the deal continues across classes from the fold
/// after the previous class's last sample, so both per-class and overall fold
/// sizes differ by at most 1. A class smaller than k yields a warning.
FoldAssignment stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed);

/// Stratified subset containing round(fraction * class size) samples of each
/// class (at least 1 for non-empty classes). Returns sorted positions.
std::vector<std::size_t> stratified_subsample(std::span<const int> labels, double fraction,
                                              std::uint64_t seed);

enum class SamplerMode { Default, Rebalance };

std::string_view to_string(SamplerMode mode);
SamplerMode parse_sampler_mode(std::string_view name);

/// Positions into the dataset. All batches hold `batch_size` entries except
/// possibly the last one of a Default epoch.
struct BatchSpec {
  std::vector<std::size_t> indices;
  SamplerMode mode = SamplerMode::Default;
};

/// Uniform shuffle of the training set each epoch, cut into consecutive
/// batches; the short final batch is kept.
class DefaultBatcher {
 public:
  DefaultBatcher(std::vector<std::size_t> train_indices, std::size_t batch_size, std::uint64_t seed);

  std::vector<BatchSpec> epoch(std::size_t epoch_index) const;
  std::size_t batches_per_epoch() const;

 private:
  std::vector<std::size_t> indices_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

/// Each slot draws a class uniformly, then a member of that class uniformly
/// with replacement. An epoch is ceil(train_size / batch_size) full batches.
/// In quota mode every batch holds floor(B / classes) of each class and the
/// remaining slots are drawn as above.
class RebalancedBatcher {
 public:
  /// `labels` covers the whole dataset; only `train_indices` are drawn.
  /// Throws ConfigError if any of the `num_classes` classes is absent.
  RebalancedBatcher(std::span<const int> labels, std::span<const std::size_t> train_indices,
                    std::size_t num_classes, std::size_t batch_size, std::uint64_t seed,
                    bool quota = false);

  std::vector<BatchSpec> epoch(std::size_t epoch_index) const;
  std::size_t batches_per_epoch() const { return batches_; }

 private:
  std::vector<std::vector<std::size_t>> by_class_;
  std::size_t batch_size_;
  std::size_t batches_;
  std::uint64_t seed_;
  bool quota_;
};

}  // namespace bytefam
