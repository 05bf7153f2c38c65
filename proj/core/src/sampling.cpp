#include "bytefam/sampling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "bytefam/errors.hpp"
#include "bytefam/random.hpp"

namespace bytefam {
namespace {

std::map<int, std::vector<std::size_t>> group_by_class(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

}  // namespace

std::vector<std::size_t> FoldAssignment::fold_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(num_folds, 0);
  for (int f : fold_of) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

FoldAssignment stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ArgumentError("fold count must be positive");
  FoldAssignment folds;
  folds.num_folds = k;
  folds.fold_of.assign(labels.size(), -1);
  Rng rng(derive_seed(seed, {0xF01D}));
  std::size_t next = 0;
  for (auto& [cls, members] : group_by_class(labels)) {
    if (members.size() < k) {
      folds.warnings.push_back("class " + std::to_string(cls) + " has " +
                               std::to_string(members.size()) + " samples, fewer than " +
                               std::to_string(k) + " folds");
    }
    shuffle(std::span<std::size_t>(members), rng);
    for (auto idx : members) {
      folds.fold_of[idx] = static_cast<int>(next);
      next = (next + 1) % k;
    }
  }
  return folds;
}

std::vector<std::size_t> stratified_subsample(std::span<const int> labels, double fraction,
                                              std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("subsample fraction must be in (0, 1]");
  Rng rng(derive_seed(seed, {0x5B5}));
  std::vector<std::size_t> out;
  for (auto& [cls, members] : group_by_class(labels)) {
    shuffle(std::span<std::size_t>(members), rng);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    take = std::clamp<std::size_t>(take, 1, members.size());
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string_view to_string(SamplerMode mode) {
  return mode == SamplerMode::Default ? "default" : "rebalance";
}

SamplerMode parse_sampler_mode(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "default" || lower == "def") return SamplerMode::Default;
  if (lower == "rebalance" || lower == "reb") return SamplerMode::Rebalance;
  throw ConfigError("unknown sampler '" + std::string(name) + "' (expected default or rebalance)");
}

DefaultBatcher::DefaultBatcher(std::vector<std::size_t> train_indices, std::size_t batch_size,
                               std::uint64_t seed)
    : indices_(std::move(train_indices)), batch_size_(batch_size), seed_(seed) {
  if (indices_.empty()) throw ConfigError("training set is empty");
  if (batch_size_ == 0) throw ConfigError("batch size must be positive");
}

std::size_t DefaultBatcher::batches_per_epoch() const {
  return (indices_.size() + batch_size_ - 1) / batch_size_;
}

std::vector<BatchSpec> DefaultBatcher::epoch(std::size_t epoch_index) const {
  auto order = indices_;
  Rng rng(derive_seed(seed_, {0xDEF, epoch_index}));
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<BatchSpec> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size_) {
    const std::size_t end = std::min(order.size(), begin + batch_size_);
    batches.push_back({{order.begin() + static_cast<std::ptrdiff_t>(begin),
                        order.begin() + static_cast<std::ptrdiff_t>(end)},
                       SamplerMode::Default});
  }
  return batches;
}

RebalancedBatcher::RebalancedBatcher(std::span<const int> labels,
                                     std::span<const std::size_t> train_indices,
                                     std::size_t num_classes, std::size_t batch_size,
                                     std::uint64_t seed, bool quota)
    : by_class_(num_classes), batch_size_(batch_size), seed_(seed), quota_(quota) {
  if (train_indices.empty()) throw ConfigError("training set is empty");
  if (batch_size_ == 0) throw ConfigError("batch size must be positive");
  for (auto idx : train_indices) {
    const int cls = labels[idx];
    if (cls < 0 || static_cast<std::size_t>(cls) >= num_classes) {
      throw ConfigError("label " + std::to_string(cls) + " outside 0.." + std::to_string(num_classes - 1));
    }
    by_class_[static_cast<std::size_t>(cls)].push_back(idx);
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (by_class_[c].empty()) {
      throw ConfigError("class " + std::to_string(c) +
                        " is absent from the training split; cannot rebalance");
    }
  }
  batches_ = (train_indices.size() + batch_size_ - 1) / batch_size_;
}

std::vector<BatchSpec> RebalancedBatcher::epoch(std::size_t epoch_index) const {
  Rng rng(derive_seed(seed_, {0x4EB, epoch_index}));
  const std::size_t classes = by_class_.size();
  auto draw_from = [&](std::size_t cls) {
    const auto& members = by_class_[cls];
    return members[uniform_index(rng, members.size())];
  };
  std::vector<BatchSpec> batches(batches_);
  for (auto& batch : batches) {
    batch.mode = SamplerMode::Rebalance;
    batch.indices.reserve(batch_size_);
    if (quota_) {
      const std::size_t per_class = batch_size_ / classes;
      for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t j = 0; j < per_class; ++j) batch.indices.push_back(draw_from(c));
      }
    }
    while (batch.indices.size() < batch_size_) {
      batch.indices.push_back(draw_from(uniform_index(rng, classes)));
    }
    if (quota_) shuffle(std::span<std::size_t>(batch.indices), rng);
  }
  return batches;
}

}  // namespace bytefam
