#include <benchmark/benchmark.h>

#include <vector>

#include "bytefam/ingest.hpp"
#include "bytefam/models.hpp"
#include "bytefam/network.hpp"
#include "bytefam/nn/kernels.hpp"
#include "bytefam/random.hpp"
#include "bytefam/resample.hpp"

using namespace bytefam;
namespace k = bytefam::nn::kernels;

namespace {

nn::Buffer<float> random_buffer(std::size_t n, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  Rng rng(seed);
  nn::Buffer<float> v(n);
  for (auto& x : v) x = static_cast<float>(uniform_real(rng, lo, hi));
  return v;
}

// Conv layers of the reference stack: (cin, cout, input length).
constexpr std::size_t kConv[3][3] = {{1, 30, 10'000}, {30, 50, 1'998}, {50, 90, 398}};
constexpr std::size_t kKernel = 7;

void BM_ConvForward(benchmark::State& state) {
  const auto [cin, cout, len] = kConv[state.range(0)];
  const auto x = random_buffer(cin * len, 1, 0.0f, 255.0f);
  const auto w = random_buffer(cout * cin * kKernel, 2);
  const auto b = random_buffer(cout, 3);
  nn::Buffer<float> y(cout * (len - kKernel + 1)), col;
  for (auto _ : state) {
    k::conv1d_forward(x.data(), cin, len, w.data(), b.data(), cout, kKernel, y.data(), col);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_ConvForward)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

void BM_ConvBackward(benchmark::State& state) {
  const auto [cin, cout, len] = kConv[state.range(0)];
  const std::size_t out_len = len - kKernel + 1;
  const auto x = random_buffer(cin * len, 1);
  const auto w = random_buffer(cout * cin * kKernel, 2);
  const auto dy = random_buffer(cout * out_len, 4);
  nn::Buffer<float> dw(w.size()), db(cout), dx(x.size()), col, dcol;
  for (auto _ : state) {
    k::conv1d_backward(x.data(), cin, len, w.data(), cout, kKernel, dy.data(), dw.data(),
                       db.data(), dx.data(), col, dcol);
    benchmark::DoNotOptimize(dx.data());
  }
}
BENCHMARK(BM_ConvBackward)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

// LSTM over the conv output: 78 steps of 90 features, 128 hidden units.
constexpr std::size_t kSteps = 78, kFeatures = 90, kHidden = 128;

void BM_LstmForward(benchmark::State& state) {
  const auto x = random_buffer(kFeatures * kSteps, 1);
  const auto wx = random_buffer(4 * kHidden * kFeatures, 2, -0.1f, 0.1f);
  const auto wh = random_buffer(4 * kHidden * kHidden, 3, -0.1f, 0.1f);
  const auto b = random_buffer(4 * kHidden, 4);
  k::LstmCache<float> cache;
  for (auto _ : state) {
    k::lstm_forward(x.data(), kFeatures, kSteps, wx.data(), wh.data(), b.data(), kHidden, false,
                    cache);
    benchmark::DoNotOptimize(cache.hidden.data());
  }
}
BENCHMARK(BM_LstmForward)->Unit(benchmark::kMicrosecond);

void BM_LstmBackward(benchmark::State& state) {
  const auto x = random_buffer(kFeatures * kSteps, 1);
  const auto wx = random_buffer(4 * kHidden * kFeatures, 2, -0.1f, 0.1f);
  const auto wh = random_buffer(4 * kHidden * kHidden, 3, -0.1f, 0.1f);
  const auto b = random_buffer(4 * kHidden, 4);
  const auto d_final = random_buffer(kHidden, 5);
  k::LstmCache<float> cache;
  k::lstm_forward(x.data(), kFeatures, kSteps, wx.data(), wh.data(), b.data(), kHidden, false,
                  cache);
  nn::Buffer<float> dwx(wx.size()), dwh(wh.size()), db(b.size()), dx(x.size());
  for (auto _ : state) {
    k::lstm_backward<float>(x.data(), kFeatures, kSteps, wx.data(), wh.data(), kHidden, false, cache,
                     nullptr, d_final.data(), dwx.data(), dwh.data(), db.data(), dx.data());
    benchmark::DoNotOptimize(dx.data());
  }
}
BENCHMARK(BM_LstmBackward)->Unit(benchmark::kMicrosecond);

void BM_Resample(benchmark::State& state) {
  Rng rng(9);
  ByteSequence seq{"bench", std::vector<std::uint8_t>(static_cast<std::size_t>(state.range(0)))};
  for (auto& v : seq.bytes) v = static_cast<std::uint8_t>(uniform_index(rng, 256));
  const auto mode = state.range(1) == 0 ? ResampleMode::Linear : ResampleMode::Area;
  for (auto _ : state) benchmark::DoNotOptimize(resample(seq, kSequenceLength, mode));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Resample)
    ->ArgsProduct({{2'048, 100'000, 4'000'000}, {0, 1}})
    ->Unit(benchmark::kMicrosecond);

void BM_HexParse(benchmark::State& state) {
  Rng rng(10);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(state.range(0)));
  for (auto& v : bytes) v = static_cast<std::uint8_t>(uniform_index(rng, 256));
  const auto text = format_hex_dump(bytes);
  for (auto _ : state) benchmark::DoNotOptimize(parse_hex_dump(std::string_view(text)));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_HexParse)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMicrosecond);

void BM_PredictOne(benchmark::State& state) {
  const auto arch = static_cast<Architecture>(state.range(0));
  const auto params = build_model<float>(ModelConfig::reference(arch));
  const auto row = random_buffer(kSequenceLength, 11, 0.0f, 255.0f);
  const nn::Tensor<float> batch({1, kSequenceLength}, std::vector<float>(row.begin(), row.end()));
  for (auto _ : state) benchmark::DoNotOptimize(predict_proba(params, batch, 1));
  state.SetLabel(std::string(to_string(arch)));
}
BENCHMARK(BM_PredictOne)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto arch = static_cast<Architecture>(state.range(0));
  const std::size_t n = static_cast<std::size_t>(state.range(1));
  const auto params = build_model<float>(ModelConfig::reference(arch));
  const auto data = random_buffer(n * kSequenceLength, 12, 0.0f, 255.0f);
  std::vector<const float*> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back(data.data() + i * kSequenceLength);
    labels.push_back(static_cast<int>(i % 9));
  }
  Network<float> net(params, 1);
  for (auto _ : state) {
    net.forward(rows, nn::Mode::Train, 5);
    benchmark::DoNotOptimize(net.backward(labels));
  }
  state.SetLabel(std::string(to_string(arch)));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_TrainStep)
    ->ArgsProduct({{0, 1, 2}, {8}})
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
