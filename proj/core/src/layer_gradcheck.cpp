#include <numeric>

#include "bytefam/gradcheck.hpp"
#include "bytefam/nn/layers.hpp"
#include "bytefam/random.hpp"

namespace bytefam {

namespace {

using nn::Direction;
using nn::Mode;
using TensorD = nn::Tensor<double>;

TensorD random_tensor(nn::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = uniform_real(rng, lo, hi);
  return t;
}

double dot(const TensorD& a, const TensorD& b) {
  return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
}

GradientBlock block(const char* name, TensorD& values, const TensorD& grad) {
  return {name, values.data(), grad.data()};
}

}  // namespace

std::vector<LayerCheck> check_layers(const GradCheckOptions& options) {
  Rng rng(derive_seed(options.seed, {0x1A}));
  std::vector<LayerCheck> out;
  const auto run = [&](const char* layer, const std::function<double()>& loss,
                       const std::vector<GradientBlock>& blocks) {
    out.push_back({layer, check_gradients(loss, blocks, options)});
  };

  {
    auto x = random_tensor({2, 3, 12}, rng);
    auto w = random_tensor({4, 3, 5}, rng);
    auto b = random_tensor({4}, rng);
    const auto r = random_tensor({2, 4, 8}, rng);
    const auto g = nn::conv1d_backward(x, w, r);
    run("conv1d", [&] { return dot(nn::conv1d_forward(x, w, b), r); },
        {block("input", x, g.input), block("weights", w, g.weights), block("bias", b, g.bias)});
  }
  {
    auto x = random_tensor({2, 3, 17}, rng);
    const auto fwd = nn::maxpool1d_forward(x, 5);
    const auto r = random_tensor(fwd.output.shape(), rng);
    const auto g = nn::maxpool1d_backward(r, fwd, x.shape(), 5);
    run("maxpool", [&] { return dot(nn::maxpool1d_forward(x, 5).output, r); },
        {block("input", x, g)});
  }
  {
    auto x = random_tensor({3, 20}, rng);
    // Keep every entry at least one step away from the kink.
    for (auto& v : x.data()) v += v > 0 ? 0.01 : -0.01;
    const auto r = random_tensor({3, 20}, rng);
    const auto g = nn::relu_backward(nn::relu_forward(x), r);
    run("relu", [&] { return dot(nn::relu_forward(x), r); }, {block("input", x, g)});
  }
  {
    auto x = random_tensor({3, 7}, rng);
    auto w = random_tensor({7, 4}, rng);
    auto b = random_tensor({4}, rng);
    const auto r = random_tensor({3, 4}, rng);
    const auto g = nn::dense_backward(x, w, r);
    run("dense", [&] { return dot(nn::dense_forward(x, w, b), r); },
        {block("input", x, g.input), block("weights", w, g.weights), block("bias", b, g.bias)});
  }
  for (auto dir : {Direction::Forward, Direction::Backward}) {
    const bool fwd_dir = dir == Direction::Forward;
    auto x = random_tensor({2, 6, 3}, rng);
    nn::LstmParams<double> p{random_tensor({16, 3}, rng), random_tensor({16, 4}, rng),
                             random_tensor({16}, rng)};
    const auto rh = random_tensor({2, 6, 4}, rng);
    const auto rf = random_tensor({2, 4}, rng);
    const auto g = nn::lstm_backward(x, p, dir, nn::lstm_forward(x, p, dir), rh, rf);
    run(fwd_dir ? "lstm_forward" : "lstm_backward",
        [&] {
          const auto o = nn::lstm_forward(x, p, dir);
          return dot(o.hidden, rh) + dot(o.final_state, rf);
        },
        {block("input", x, g.input),
         block("input_weights", p.input_weights, g.params.input_weights),
         block("recurrent_weights", p.recurrent_weights, g.params.recurrent_weights),
         block("bias", p.bias, g.params.bias)});

    const auto f = nn::lstm_backward(x, p, dir, nn::lstm_forward(x, p, dir), TensorD(), rf);
    run(fwd_dir ? "lstm_forward_final_state" : "lstm_backward_final_state",
        [&] { return dot(nn::lstm_forward(x, p, dir).final_state, rf); },
        {block("input", x, f.input),
         block("input_weights", p.input_weights, f.params.input_weights),
         block("recurrent_weights", p.recurrent_weights, f.params.recurrent_weights),
         block("bias", p.bias, f.params.bias)});
  }
  {
    auto x = random_tensor({4, 10}, rng);
    const std::uint64_t mask_seed = rng();
    Rng mask_rng(mask_seed);
    const auto fwd = nn::dropout(x, 0.3, Mode::Train, mask_rng);
    const auto r = random_tensor({4, 10}, rng);
    TensorD g({4, 10});
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = r[i] * fwd.mask[i];
    run("dropout",
        [&] {
          Rng same(mask_seed);
          return dot(nn::dropout(x, 0.3, Mode::Train, same).output, r);
        },
        {block("input", x, g)});
  }
  {
    auto logits = random_tensor({3, 9}, rng, -3, 3);
    const std::vector<int> labels{2, 0, 8};
    const auto g = nn::softmax_cross_entropy_backward(
        nn::softmax_cross_entropy(logits, labels).probabilities, labels);
    run("softmax_cross_entropy", [&] { return nn::softmax_cross_entropy(logits, labels).loss; },
        {block("logits", logits, g)});
  }
  {
    auto w = random_tensor({5, 3}, rng);
    TensorD g(w.shape());
    nn::add_l2_gradient(w, 0.3, g);
    const std::vector<const TensorD*> ws{&w};
    run("l2_penalty", [&] { return nn::l2_penalty<double>(ws, 0.3); }, {block("weights", w, g)});
  }
  return out;
}

}  // namespace bytefam
