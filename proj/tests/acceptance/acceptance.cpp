// Acceptance checks 1-8. Prints one PASS/FAIL/SKIP line per criterion and
// exits nonzero if any criterion fails. Arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bytefam/gradcheck.hpp"
#include "bytefam/ingest.hpp"
#include "bytefam/metrics.hpp"
#include "bytefam/model_io.hpp"
#include "bytefam/models.hpp"
#include "bytefam/network.hpp"
#include "bytefam/random.hpp"
#include "bytefam/resample.hpp"
#include "bytefam/sampling.hpp"
#include "bytefam/training.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace bytefam;
using bytefam::testing::SyntheticOptions;
using bytefam::testing::TempDir;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

/// Collects failed sub-checks; the criterion passes only if none failed.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& text) { notes_.push_back(text); }

  Outcome outcome() const {
    std::string detail;
    for (const auto& n : notes_) detail += (detail.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) detail += (detail.empty() ? "FAILED " : "; FAILED ") + f;
    return {failures_.empty() ? Status::Pass : Status::Fail, detail};
  }

 private:
  std::vector<std::string> notes_;
  std::vector<std::string> failures_;
};

unsigned cores() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Wall-clock budget stated for `reference_cores`, scaled to the cores present.
double scaled_budget(double seconds, unsigned reference_cores) {
  return seconds * std::max(1.0, static_cast<double>(reference_cores) / cores());
}

// Class sizes of the labeled corpus, in class-index order.
const std::vector<std::size_t> kKaggleClassCounts{1541, 2478, 2942, 475, 42, 751, 398, 1228, 1013};

std::vector<int> kaggle_class_labels() {
  std::vector<int> labels;
  for (std::size_t c = 0; c < kKaggleClassCounts.size(); ++c)
    labels.insert(labels.end(), kKaggleClassCounts[c], static_cast<int>(c));
  return labels;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::vector<int> labels_of(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(data.labels()[i]);
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  const auto start = Clock::now();
  Checks c;
  const std::pair<Architecture, std::size_t> expected[] = {
      {Architecture::Cnn, 1'842'069},
      {Architecture::CnnUniLstm, 155'669},
      {Architecture::CnnBiLstm, 268'949}};
  for (const auto& [arch, count] : expected) {
    const auto params = build_model<float>(ModelConfig::reference(arch));
    const auto built = count_params(params);
    c.note(fmt("%s %zu", std::string(to_string(arch)).c_str(), built));
    c.expect(built == count, fmt("%s expected %zu", std::string(to_string(arch)).c_str(), count));
    c.expect(count_params(ModelConfig::reference(arch)) == count, "analytic count");
  }
  const double t = seconds_since(start);
  c.expect(t < 1.0, fmt("runtime %.2f s >= 1 s", t));
  return c.outcome();
}

Outcome criterion2() {
  const auto start = Clock::now();
  Checks c;
  const GradCheckOptions opts;  // step 1e-5, tolerance 1e-4, 64-bit
  double worst_layer = 0.0;
  for (const auto& lc : check_layers(opts)) {
    worst_layer = std::max(worst_layer, lc.report.max_rel_error);
    c.expect(lc.report.passed, fmt("layer %s rel err %.3g", lc.layer.c_str(),
                                   lc.report.max_rel_error));
  }
  c.note(fmt("layers max rel err %.2g", worst_layer));
  for (auto arch : {Architecture::Cnn, Architecture::CnnUniLstm, Architecture::CnnBiLstm}) {
    const auto cfg = toy_config(arch);
    const auto report = grad_check(cfg, opts);
    const auto name = std::string(to_string(arch));
    c.note(fmt("%s max rel err %.2g", name.c_str(), report.max_rel_error));
    c.expect(cfg.input_len == 64 && opts.batch == 2, "toy shape");
    c.expect(report.passed, name + " gradient check");

    GradCheckOptions corrupt = opts;
    corrupt.gradient_perturbation = 1e-2;
    c.expect(!grad_check(cfg, corrupt).passed, name + " negative control passed");
  }
  GradCheckOptions corrupt = opts;
  corrupt.gradient_perturbation = 1e-2;
  for (const auto& lc : check_layers(corrupt))
    c.expect(!lc.report.passed, "negative control passed for layer " + lc.layer);
  c.note("negative controls detected");
  const double t = seconds_since(start);
  c.expect(t < 300.0, fmt("runtime %.1f s >= 300 s", t));
  return c.outcome();
}

Outcome criterion3() {
  const auto start = Clock::now();
  Checks c;
  const std::vector<double> two{0.0, 255.0};
  c.expect(resample_linear(two, 4) == std::vector<double>{0.0, 85.0, 170.0, 255.0},
           "[0,255] -> 4 points");

  Rng rng(derive_seed(31, {3}));
  std::size_t identity = 0, bounded = 0, monotone = 0, constant = 0;
  const std::size_t trials = 1000;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const bool exact = trial % 4 == 0;
    const std::size_t n = exact ? kSequenceLength : 1 + uniform_index(rng, 40'000);
    std::vector<double> x(n);
    for (auto& v : x) v = static_cast<double>(uniform_index(rng, 256));

    const auto y = resample_linear(x, kSequenceLength);
    if (exact && y == x) ++identity;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (y.size() == kSequenceLength &&
        std::all_of(y.begin(), y.end(), [&](double v) { return v >= *lo && v <= *hi; }))
      ++bounded;

    auto sorted = x;
    std::sort(sorted.begin(), sorted.end());
    if (trial % 2 == 1) std::reverse(sorted.begin(), sorted.end());
    const auto ys = resample_linear(sorted, kSequenceLength);
    const bool up = trial % 2 == 0;
    bool mono = true;
    for (std::size_t j = 1; j < ys.size(); ++j)
      mono = mono && (up ? ys[j] >= ys[j - 1] : ys[j] <= ys[j - 1]);
    if (mono) ++monotone;

    const std::vector<double> flat(n, x.front());
    const auto yc = resample_linear(flat, kSequenceLength);
    if (std::all_of(yc.begin(), yc.end(), [&](double v) { return v == x.front(); })) ++constant;
  }
  const std::size_t exact_trials = (trials + 3) / 4;
  c.note(fmt("%zu inputs: identity %zu/%zu, bounded %zu, monotone %zu, constant %zu", trials,
             identity, exact_trials, bounded, monotone, constant));
  c.expect(identity == exact_trials, "identity");
  c.expect(bounded == trials, "boundedness");
  c.expect(monotone == trials, "monotonicity");
  c.expect(constant == trials, "constant preservation");
  const double t = seconds_since(start);
  c.expect(t < 10.0, fmt("runtime %.1f s >= 10 s", t));
  return c.outcome();
}

Outcome criterion4() {
  const auto start = Clock::now();
  Checks c;
  const auto labels = kaggle_class_labels();
  const auto all = iota_indices(labels.size());

  // 10,000 rebalanced batches of 64 over the class-skewed corpus.
  RebalancedBatcher rebalanced(labels, all, 9, 64, 404);
  std::vector<double> counts(9, 0.0);
  std::size_t batches = 0, slots = 0;
  for (std::size_t epoch = 0; batches < 10'000; ++epoch) {
    for (const auto& b : rebalanced.epoch(epoch)) {
      if (batches == 10'000) break;
      c.expect(b.indices.size() == 64, "rebalanced batch size");
      for (auto i : b.indices) counts[static_cast<std::size_t>(labels[i])] += 1.0;
      slots += b.indices.size();
      ++batches;
    }
  }
  double chi2 = 0.0, worst = 0.0;
  const double expected = static_cast<double>(slots) / 9.0;
  for (double k : counts) {
    chi2 += (k - expected) * (k - expected) / expected;
    worst = std::max(worst, std::abs(k / static_cast<double>(slots) - 1.0 / 9.0));
  }
  constexpr double kChi2Df8Q999 = 26.1245;
  c.note(fmt("rebalanced: max |freq - 1/9| %.4f, chi2 %.2f", worst, chi2));
  c.expect(worst <= 0.02, "class frequency outside +-2%");
  c.expect(chi2 < kChi2Df8Q999, "chi-square above the 0.999 quantile");

  // Default generator: every epoch is a permutation of the training set.
  DefaultBatcher plain(all, 64, 404);
  bool permutation = true;
  for (std::size_t epoch = 0; epoch < 5; ++epoch) {
    std::vector<std::size_t> seen;
    for (const auto& b : plain.epoch(epoch)) seen.insert(seen.end(), b.indices.begin(), b.indices.end());
    std::sort(seen.begin(), seen.end());
    permutation = permutation && seen == all;
  }
  c.expect(permutation, "default epoch is not a permutation");

  // Stratified folds.
  const auto folds = stratified_folds(labels, 5, 404);
  bool balanced = true;
  std::vector<std::size_t> simda(5, 0);
  for (std::size_t cls = 0; cls < 9; ++cls) {
    std::vector<std::size_t> per(5, 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == static_cast<int>(cls)) ++per[static_cast<std::size_t>(folds.fold_of[i])];
    const auto [lo, hi] = std::minmax_element(per.begin(), per.end());
    balanced = balanced && *hi - *lo <= 1;
    if (cls == 4) simda = per;
  }
  std::sort(simda.begin(), simda.end(), std::greater<>());
  c.expect(balanced, "per-class fold counts differ by more than 1");
  c.expect(simda == std::vector<std::size_t>{9, 9, 8, 8, 8}, "Simda fold sizes");
  c.note("default permutations ok; Simda folds {9,9,8,8,8}");
  const double t = seconds_since(start);
  c.expect(t < 60.0, fmt("runtime %.1f s >= 60 s", t));
  return c.outcome();
}

Outcome criterion5() {
  const auto start = Clock::now();
  Checks c;
  SyntheticOptions opts;
  opts.class_counts.assign(9, 10);
  const auto data = testing::synthetic_dataset(opts);
  const auto all = iota_indices(data.size());

  auto model = ModelConfig::reference(Architecture::Cnn);
  TrainConfig train;
  train.epochs = 200;
  train.sampler = SamplerMode::Default;
  train.track_validation = false;
  std::size_t reached = 0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r, const ModelParams<float>& p) {
    const auto report = compute_metrics(predict_dataset(p, data, all), data.labels());
    if (report.micro_accuracy == 1.0) reached = r.epoch;
    return reached == 0;
  };
  train_fold(data, all, {}, model, train, hooks);
  c.note(reached ? fmt("100%% training accuracy at epoch %zu", reached)
                 : std::string("100% not reached in 200 epochs"));
  c.expect(reached > 0, "overfit");
  const double t = seconds_since(start);
  c.expect(t < scaled_budget(300.0, 4), fmt("runtime %.1f s over budget", t));
  return c.outcome();
}

struct HeldOutRun {
  double accuracy = 0.0;
  double minority_f1 = 0.0;
};

Outcome criterion6() {
  const auto start = Clock::now();
  Checks c;
  SyntheticOptions opts;
  opts.class_counts.assign(9, 220);
  opts.class_counts[4] = 40;
  constexpr int kMinority = 4;

  TempDir dir("bytefam-acceptance");
  testing::write_synthetic_corpus(dir.path(), opts);
  const auto samples = load_corpus(dir.path(), dir / "labels.csv");
  Dataset data;
  data.reserve(samples.size());
  for (const auto& s : samples)
    data.add(s.sequence.sample_id, resample(s.sequence).values, s.label);
  c.expect(data.size() == 1800, "corpus size");

  const auto folds = stratified_folds(data.labels(), 5, 2024);
  const auto train_idx = folds.train_indices(0);
  const auto test_idx = folds.fold_indices(0);
  const auto test_labels = labels_of(data, test_idx);

  constexpr std::size_t kEpochs = 12;
  const auto run = [&](SamplerMode mode, std::uint64_t seed) {
    auto model = ModelConfig::reference(Architecture::CnnBiLstm);
    model.seed = seed;
    TrainConfig train;
    train.epochs = kEpochs;
    train.sampler = mode;
    train.seed = seed;
    train.track_validation = false;
    const auto result = train_fold(data, train_idx, {}, model, train);
    const auto report = compute_metrics(predict_dataset(result.params, data, test_idx), test_labels);
    return HeldOutRun{report.micro_accuracy,
                      report.per_class_f1[static_cast<std::size_t>(kMinority)]};
  };

  double acc_sum = 0.0, f1_rebalance = 0.0, f1_default = 0.0;
  std::string accs, f1r, f1d;
  constexpr std::size_t kSeeds = 5;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    const auto r = run(SamplerMode::Rebalance, seed);
    const auto d = run(SamplerMode::Default, seed);
    acc_sum += r.accuracy;
    f1_rebalance += r.minority_f1;
    f1_default += d.minority_f1;
    accs += fmt("%s%.3f", seed == 1 ? "" : ",", r.accuracy);
    f1r += fmt("%s%.3f", seed == 1 ? "" : ",", r.minority_f1);
    f1d += fmt("%s%.3f", seed == 1 ? "" : ",", d.minority_f1);
  }
  const double mean_acc = acc_sum / kSeeds;
  f1_rebalance /= kSeeds;
  f1_default /= kSeeds;
  c.note(fmt("rebalance held-out accuracy mean %.4f", mean_acc) + " [" + accs + "]");
  c.note(fmt("minority F1 rebalance %.4f", f1_rebalance) + " [" + f1r + "]" +
         fmt(" vs default %.4f", f1_default) + " [" + f1d + "]");
  c.expect(mean_acc >= 0.95, "held-out accuracy below 95%");
  c.expect(f1_rebalance >= f1_default, "minority F1 under rebalance below default");
  const double t = seconds_since(start);
  c.note(fmt("%zu epochs per run, %.0f s", kEpochs, t));
  c.expect(t < scaled_budget(1800.0, 8), fmt("runtime %.0f s over budget", t));
  return c.outcome();
}

Outcome criterion7() {
  const char* root = std::getenv("BYTEFAM_KAGGLE_DIR");
  if (root == nullptr || *root == '\0')
    return {Status::Skip, "BYTEFAM_KAGGLE_DIR not set (needs trainLabels.csv and train/)"};
  Checks c;
  const fs::path base(root);
  const fs::path labels = base / "trainLabels.csv";
  const fs::path samples_dir = fs::is_directory(base / "train") ? base / "train" : base;
  const auto samples = load_corpus(samples_dir, labels);
  Dataset data;
  data.reserve(samples.size());
  for (const auto& s : samples)
    data.add(s.sequence.sample_id, resample(s.sequence).values, s.label);

  TrainConfig train;
  if (const char* e = std::getenv("BYTEFAM_KAGGLE_EPOCHS")) train.epochs = std::stoul(e);
  const auto model = ModelConfig::reference(Architecture::CnnBiLstm);

  const auto subset_idx = stratified_subsample(data.labels(), 0.2, train.seed);
  const auto subset = data.subset(subset_idx);
  const auto sub = cross_validate(subset, model, train).report;
  c.note(fmt("subsample 0.2: accuracy %.4f macro-F1 %.4f", sub.micro_accuracy, sub.macro_f1));
  c.expect(sub.micro_accuracy >= 0.95, "subsample accuracy below 95%");

  if (const char* full = std::getenv("BYTEFAM_KAGGLE_FULL"); full && std::string(full) == "1") {
    const auto report = cross_validate(data, model, train).report;
    c.note(fmt("full: accuracy %.4f macro-F1 %.4f", report.micro_accuracy, report.macro_f1));
    c.expect(report.micro_accuracy >= 0.97, "full accuracy below 97%");
    c.expect(report.macro_f1 >= 0.94, "full macro-F1 below 94%");
  } else {
    c.note("full 5-fold run skipped (set BYTEFAM_KAGGLE_FULL=1)");
  }
  return c.outcome();
}

Outcome criterion8() {
  Checks c;
  SyntheticOptions opts;
  opts.class_counts.assign(9, 56);  // 504 files
  opts.seed = 8;
  TempDir dir("bytefam-latency");
  testing::write_synthetic_corpus(dir.path(), opts, /*hex=*/true);
  const auto files = list_sample_files(dir.path());
  c.expect(files.size() >= 500, "fewer than 500 files");

  const auto params = build_model<float>(ModelConfig::reference(Architecture::CnnBiLstm));
  double preprocess = 0.0, predict = 0.0;
  std::size_t rows = 0;
  for (const auto& [id, path] : files) {
    auto t0 = Clock::now();
    const auto seq = resample(read_sample(path));
    preprocess += seconds_since(t0);
    t0 = Clock::now();
    nn::Tensor<float> batch({1, kSequenceLength}, std::vector<float>(seq.values));
    const auto probs = predict_proba(params, batch, 1);
    predict += seconds_since(t0);
    rows += probs.dim(0);
  }
  const double n = static_cast<double>(files.size());
  const double per_file = (preprocess + predict) / n;
  c.note(fmt("%zu hex files: preprocess %.4f s + predict %.4f s = %.4f s per file", files.size(),
             preprocess / n, predict / n, per_file));
  c.expect(rows == files.size(), "one prediction per file");
  c.expect(per_file <= 0.1, "average latency above 0.1 s");

  // Two identical single-thread runs must produce byte-identical reports.
  SyntheticOptions small;
  small.class_counts.assign(9, 10);
  const auto data = testing::synthetic_dataset(small);
  const auto report_text = [&] {
    TrainConfig train;
    train.epochs = 2;
    train.threads = 1;
    const auto cv = cross_validate(data, ModelConfig::reference(Architecture::CnnBiLstm), train);
    std::ostringstream out;
    out << format_key_values(cv.report);
    for (const auto& h : cv.fold_histories)
      for (const auto& r : h) write_history_line(out, r);
    out.write(reinterpret_cast<const char*>(cv.out_of_fold.ptr()),
              static_cast<std::streamsize>(cv.out_of_fold.size() * sizeof(float)));
    return out.str();
  };
  const auto first = report_text();
  const auto second = report_text();
  c.expect(first == second, "reports differ between identical runs");
  c.note(fmt("two single-thread CV runs bit-identical (%zu report bytes)", first.size()));
  return c.outcome();
}

const char* status_name(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Skip: return "SKIP";
  }
  return "?";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"parameter counts", criterion1},
      {"gradient checks", criterion2},
      {"resampler properties", criterion3},
      {"sampler statistics", criterion4},
      {"overfit sanity", criterion5},
      {"synthetic end-to-end", criterion6},
      {"labeled corpus cross-validation", criterion7},
      {"latency and determinism", criterion8}};

  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const std::size_t k = std::strtoul(argv[i], nullptr, 10);
    if (k < 1 || k > criteria.size()) {
      std::cerr << "usage: " << argv[0] << " [criterion numbers 1-8]\n";
      return 2;
    }
    selected.insert(k);
  }
  if (selected.empty())
    for (std::size_t k = 1; k <= criteria.size(); ++k) selected.insert(k);

  bool failed = false;
  for (auto k : selected) {
    const auto& [name, fn] = criteria[k - 1];
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = fn();
    } catch (const std::exception& e) {
      outcome = {Status::Fail, std::string("exception: ") + e.what()};
    }
    failed = failed || outcome.status == Status::Fail;
    std::cout << status_name(outcome.status) << "  criterion " << k << " (" << name << ", "
              << fmt("%.1f s", seconds_since(start)) << "): " << outcome.detail << std::endl;
  }
  return failed ? 1 : 0;
}
