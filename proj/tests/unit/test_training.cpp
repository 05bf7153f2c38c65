#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bytefam/errors.hpp"
#include "bytefam/gradcheck.hpp"
#include "bytefam/network.hpp"
#include "bytefam/training.hpp"
#include "doctest.h"
#include "synthetic.hpp"

using namespace bytefam;

namespace {

Dataset toy_data(std::size_t per_class = 8) {
  bytefam::testing::SyntheticOptions opts;
  opts.class_counts.assign(9, per_class);
  opts.min_bytes = 256;
  opts.max_bytes = 4096;
  opts.motif_fraction = 0.3;
  opts.motif_segments = 3;
  return bytefam::testing::synthetic_dataset(opts, 64);
}

std::vector<std::size_t> all_indices(const Dataset& d) {
  std::vector<std::size_t> v(d.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

double log_loss_of(const ModelParams<float>& params, const Dataset& data) {
  const auto idx = all_indices(data);
  return compute_metrics(predict_dataset(params, data, idx, 1), data.labels()).avg_log_loss;
}

TrainConfig quick(std::size_t epochs, SamplerMode sampler = SamplerMode::Rebalance) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 16;
  t.sampler = sampler;
  t.threads = 1;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("dataset rows and subsets") {
  Dataset d(3);
  const std::vector<float> a{1, 2, 3}, b{4, 5, 6};
  d.add("a", a, 0);
  d.add("b", b, 2);
  CHECK(d.size() == 2);
  CHECK(d.row(1)[2] == 6.0f);
  const std::vector<std::size_t> pick{1};
  const auto sub = d.subset(pick);
  CHECK(sub.ids() == std::vector<std::string>{"b"});
  CHECK(d.batch(pick).shape() == nn::Shape{1, 3});
  const std::vector<float> wrong{1, 2};
  CHECK_THROWS_AS(d.add("c", wrong, 0), ShapeError);
}

TEST_CASE("one epoch lowers the loss") {
  const auto data = toy_data();
  const auto model = toy_config(Architecture::CnnBiLstm);
  const double untrained = log_loss_of(build_model<float>(model), data);
  double after_first = 0.0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord&, const ModelParams<float>& p) {
    after_first = log_loss_of(p, data);
    return false;
  };
  const auto idx = all_indices(data);
  const auto result = train_fold(data, idx, {}, model, quick(5), hooks);
  CHECK(result.history.size() == 1);
  CHECK(after_first < untrained);
}

TEST_CASE("training is reproducible and independent of thread count") {
  const auto data = toy_data();
  const auto model = toy_config(Architecture::CnnUniLstm);
  const auto idx = all_indices(data);
  const std::vector<std::size_t> train(idx.begin(), idx.begin() + 60);
  const std::vector<std::size_t> val(idx.begin() + 60, idx.end());
  auto cfg = quick(3, SamplerMode::Default);
  const auto a = train_fold(data, train, val, model, cfg);
  const auto b = train_fold(data, train, val, model, cfg);
  cfg.threads = 3;
  const auto c = train_fold(data, train, val, model, cfg);
  CHECK(a.params.tensors == b.params.tensors);
  CHECK(a.params.tensors == c.params.tensors);
  REQUIRE(a.history.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(a.history[e].train_loss == c.history[e].train_loss);
    CHECK(a.history[e].val_loss == b.history[e].val_loss);
    CHECK(a.history[e].epoch == e + 1);
  }
  cfg.seed = 6;
  CHECK_FALSE(train_fold(data, train, val, model, cfg).params.tensors == a.params.tensors);
}

TEST_CASE("64-bit training mode") {
  const auto data = toy_data(4);
  auto cfg = quick(2);
  cfg.precision = Precision::Float64;
  const auto idx = all_indices(data);
  const auto r = train_fold(data, idx, idx, toy_config(Architecture::Cnn), cfg);
  CHECK(r.history.size() == 2);
  CHECK(std::isfinite(r.history.back().val_loss));
}

TEST_CASE("cross-validation covers every sample once") {
  const auto data = toy_data(6);
  const auto model = toy_config(Architecture::Cnn);
  std::size_t epochs_seen = 0, folds_done = 0;
  CvHooks hooks;
  hooks.on_epoch = [&](std::size_t, const EpochRecord&) { ++epochs_seen; };
  hooks.on_fold_done = [&](std::size_t, const TrainResult&) { ++folds_done; };
  const auto cv = cross_validate(data, model, quick(2), 5, hooks);
  CHECK(cv.report.count == data.size());
  CHECK(cv.fold_histories.size() == 5);
  CHECK(folds_done == 5);
  CHECK(epochs_seen == 10);
  CHECK(cv.out_of_fold.shape() == nn::Shape{data.size(), 9});
  for (std::size_t i = 0; i < data.size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 9; ++k) sum += cv.out_of_fold.at({i, k});
    CHECK(std::abs(sum - 1.0) < 1e-5);
  }
  std::vector<std::size_t> per_fold(5, 0);
  for (int f : cv.folds.fold_of) ++per_fold[static_cast<std::size_t>(f)];
  CHECK(std::accumulate(per_fold.begin(), per_fold.end(), std::size_t{0}) == data.size());

  const auto again = cross_validate(data, model, quick(2), 5);
  CHECK(again.out_of_fold == cv.out_of_fold);
  CHECK(format_key_values(again.report) == format_key_values(cv.report));
}

TEST_CASE("final model keeps the best validation epoch") {
  const auto data = toy_data(10);
  const auto result = train_final(data, toy_config(Architecture::CnnBiLstm), quick(6), 0.2);
  const auto& h = result.training.history;
  REQUIRE(h.size() == 6);
  const auto sel = result.training.selected_epoch;
  REQUIRE(sel >= 1);
  for (const auto& r : h) CHECK(h[sel - 1].val_loss <= r.val_loss);
  CHECK(result.validation.avg_log_loss == doctest::Approx(h[sel - 1].val_loss).epsilon(1e-9));
  CHECK(result.val_indices.size() == 18);
  CHECK(result.train_indices.size() + result.val_indices.size() == data.size());
}

TEST_CASE("non-finite inputs abort with a divergence error") {
  auto data = toy_data(3);
  std::vector<float> poisoned(64, std::numeric_limits<float>::infinity());
  for (int c = 0; c < 9; ++c) data.add("bad" + std::to_string(c), poisoned, c);
  const auto idx = all_indices(data);
  CHECK_THROWS_AS(train_fold(data, idx, {}, toy_config(Architecture::Cnn), quick(1)),
                  DivergenceError);
  try {
    cross_validate(data, toy_config(Architecture::Cnn), quick(1), 3);
    FAIL("expected a fold error");
  } catch (const FoldError& e) {
    CHECK(e.fold() == 0);
  }
}

TEST_CASE("configuration errors") {
  const auto data = toy_data(2);
  const auto idx = all_indices(data);
  auto cfg = quick(0);
  CHECK_THROWS_AS(train_fold(data, idx, {}, toy_config(Architecture::Cnn), cfg), ConfigError);
  CHECK_THROWS_AS(train_fold(data, idx, {}, ModelConfig::reference(Architecture::Cnn), quick(1)),
                  ConfigError);
  CHECK_THROWS_AS(train_best_epoch(data, idx, {}, toy_config(Architecture::Cnn), quick(1)),
                  ConfigError);
}
