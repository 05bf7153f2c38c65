#include <cmath>
#include <numeric>

#include "bytefam/errors.hpp"
#include "bytefam/gradcheck.hpp"
#include "bytefam/nn/adam.hpp"
#include "bytefam/nn/layers.hpp"
#include "bytefam/random.hpp"
#include "doctest.h"

using namespace bytefam;
using namespace bytefam::nn;

namespace {

using TensorD = Tensor<double>;

TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = uniform_real(rng, lo, hi);
  return t;
}

void require_pass(const GradCheckReport& report) {
  for (const auto& t : report.tensors) {
    INFO(t.name << " max rel error " << t.max_rel_error);
    CHECK(t.max_rel_error <= 1e-4);
  }
  CHECK(report.passed);
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor<float> t({2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(t.at({1, 2}) == 1.5f);
  t.at({1, 0}) = 4.0f;
  CHECK(t[3] == 4.0f);
  t.reshape({3, 2});
  CHECK(t.shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.reshape({4, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>({2, 2}, std::vector<float>(3)), ShapeError);
  CHECK(shape_string({1, 2, 3}) == "[1 x 2 x 3]");
}

TEST_CASE("conv1d forward") {
  TensorD x({1, 1, 3}, std::vector<double>{1, 2, 3});
  TensorD w({1, 1, 3}, std::vector<double>{1, 0, -1});
  TensorD b({1}, 0.0);
  const auto y = conv1d_forward(x, w, b);
  CHECK(y.shape() == Shape{1, 1, 1});
  CHECK(y[0] == -2.0);

  Tensor<float> big({1, 1, 10000}, 3.0f);
  Tensor<float> zero_w({2, 1, 7}, 0.0f);
  Tensor<float> bias({2}, std::vector<float>{0.25f, -1.0f});
  const auto out = conv1d_forward(big, zero_w, bias);
  CHECK(out.shape() == Shape{1, 2, 9994});
  CHECK(out.at({0, 0, 5000}) == 0.25f);
  CHECK(out.at({0, 1, 9993}) == -1.0f);

  Tensor<float> short_in({1, 1, 6});
  CHECK_THROWS_AS(conv1d_forward(short_in, zero_w, bias), ShapeError);
  Tensor<float> wrong_channels({2, 3, 7});
  CHECK_THROWS_AS(conv1d_forward(big, wrong_channels, bias), ShapeError);
}

TEST_CASE("conv1d is shift-equivariant") {
  Rng rng(1);
  const std::size_t len = 50, shift = 4;
  auto x = random_tensor({1, 2, len + shift}, rng);
  TensorD a({1, 2, len}), b({1, 2, len});
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t t = 0; t < len; ++t) {
      a.at({0, c, t}) = x.at({0, c, t});
      b.at({0, c, t}) = x.at({0, c, t + shift});
    }
  }
  const auto w = random_tensor({3, 2, 5}, rng);
  const auto bias = random_tensor({3}, rng);
  const auto ya = conv1d_forward(a, w, bias);
  const auto yb = conv1d_forward(b, w, bias);
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t t = 0; t + shift < ya.dim(2); ++t) {
      REQUIRE(yb.at({0, o, t}) == doctest::Approx(ya.at({0, o, t + shift})).epsilon(1e-12));
    }
  }
}

TEST_CASE("max pooling") {
  TensorD x({1, 1, 5}, std::vector<double>{1, 3, 2, 5, 4});
  const auto r = maxpool1d_forward(x, 5);
  CHECK(r.output.shape() == Shape{1, 1, 1});
  CHECK(r.output[0] == 5.0);

  Tensor<float> long_in({1, 1, 9994});
  CHECK(maxpool1d_forward(long_in, 5).output.dim(2) == 1998);

  TensorD tie({1, 1, 2}, std::vector<double>{2, 2});
  const auto tr = maxpool1d_forward(tie, 2);
  const auto g = maxpool1d_backward(TensorD({1, 1, 1}, 1.0), tr, tie.shape(), 2);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);

  TensorD tiny({1, 1, 4});
  CHECK_THROWS_AS(maxpool1d_forward(tiny, 5), ShapeError);
}

TEST_CASE("dense layer") {
  TensorD x({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  TensorD eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at({i, i}) = 1.0;
  CHECK(dense_forward(x, eye, TensorD({3})) == x);

  TensorD zero_in({1, 3});
  TensorD bias({2}, std::vector<double>{0.5, -2});
  Rng rng(2);
  const auto y = dense_forward(zero_in, random_tensor({3, 2}, rng), bias);
  CHECK(y[0] == 0.5);
  CHECK(y[1] == -2.0);

  CHECK((7020 + 1) * 256 == 1'797'376);
  CHECK_THROWS_AS(dense_forward(x, TensorD({4, 2}), bias), ShapeError);
  CHECK_THROWS_AS(dense_forward(x, TensorD({3, 2}), TensorD({3})), ShapeError);
}

TEST_CASE("LSTM forward") {
  TensorD x({2, 5, 3}, 0.7);
  const auto zeros = LstmParams<double>::zeros(3, 4);
  const auto out = lstm_forward(x, zeros, Direction::Forward);
  CHECK(out.hidden.shape() == Shape{2, 5, 4});
  CHECK(out.final_state.shape() == Shape{2, 4});
  for (double v : out.hidden.data()) CHECK(v == 0.0);

  CHECK(lstm_parameter_count(90, 128) == 112'128);
  CHECK(LstmParams<float>::zeros(90, 128).parameter_count() == 112'128);

  auto scalar = LstmParams<double>::zeros(1, 1);
  scalar.input_weights.fill(1.0);
  scalar.recurrent_weights.fill(1.0);
  const auto one = lstm_forward(TensorD({1, 1, 1}, 1.0), scalar, Direction::Forward);
  const double s = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(one.final_state[0] == doctest::Approx(s * std::tanh(s * std::tanh(1.0))).epsilon(1e-14));

  CHECK_THROWS_AS(lstm_forward(TensorD({1, 2, 2}), zeros, Direction::Forward), ShapeError);
}

TEST_CASE("backward LSTM equals forward LSTM on the reversed sequence") {
  Rng rng(4);
  const std::size_t steps = 9, d = 3, h = 5;
  LstmParams<float> p{Tensor<float>({4 * h, d}), Tensor<float>({4 * h, h}), Tensor<float>({4 * h})};
  for (auto* t : {&p.input_weights, &p.recurrent_weights, &p.bias}) {
    for (auto& v : t->data()) v = static_cast<float>(uniform_real(rng, -1, 1));
  }
  Tensor<float> x({1, steps, d}), rx({1, steps, d});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      x.at({0, t, j}) = static_cast<float>(uniform_real(rng, -2, 2));
    }
  }
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < d; ++j) rx.at({0, t, j}) = x.at({0, steps - 1 - t, j});
  }
  const auto bwd = lstm_forward(x, p, Direction::Backward);
  const auto fwd = lstm_forward(rx, p, Direction::Forward);
  CHECK(bwd.final_state == fwd.final_state);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < h; ++j) {
      REQUIRE(bwd.hidden.at({0, t, j}) == fwd.hidden.at({0, steps - 1 - t, j}));
    }
  }
}

TEST_CASE("dropout") {
  Rng rng(8);
  Tensor<double> ones({1'000'000}, 1.0);
  const auto train = dropout(ones, 0.5, Mode::Train, rng);
  const double mean =
      std::accumulate(train.output.data().begin(), train.output.data().end(), 0.0) / 1e6;
  CHECK(std::abs(mean - 1.0) < 0.01);
  for (std::size_t i = 0; i < 1000; ++i) {
    REQUIRE((train.output[i] == 0.0 || train.output[i] == 2.0));
  }

  Tensor<double> x({4, 3}, 0.3);
  CHECK(dropout(x, 0.7, Mode::Infer, rng).output == x);
  CHECK(dropout(x, 0.0, Mode::Train, rng).output == x);
  CHECK(dropout(x, 0.0, Mode::Infer, rng).output == x);
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::Train, rng), ArgumentError);
  CHECK_THROWS_AS(dropout(x, -0.1, Mode::Train, rng), ArgumentError);
}

TEST_CASE("softmax cross-entropy") {
  TensorD uniform({2, 9}, 0.3);
  const std::vector<int> labels{0, 5};
  const auto u = softmax_cross_entropy(uniform, labels);
  CHECK(u.loss == doctest::Approx(std::log(9.0)));
  for (double p : u.probabilities.data()) CHECK(p == doctest::Approx(1.0 / 9.0));

  TensorD sharp({1, 9}, 0.0);
  sharp[0] = 1000.0;
  const std::vector<int> zero{0};
  CHECK(softmax_cross_entropy(sharp, zero).loss == doctest::Approx(0.0));

  TensorD one({1, 9}, 0.0);
  one[0] = 1.0;
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 8.0));
  CHECK(expected == doctest::Approx(1.37195).epsilon(1e-5));
  CHECK(softmax_cross_entropy(one, zero).loss == doctest::Approx(expected).epsilon(1e-12));

  Rng rng(12);
  const auto logits = random_tensor({6, 9}, rng, -30, 30);
  const std::vector<int> six{0, 1, 2, 3, 4, 8};
  const auto r = softmax_cross_entropy(logits, six);
  for (std::size_t n = 0; n < 6; ++n) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 9; ++k) {
      CHECK(r.probabilities.at({n, k}) > 0.0);
      sum += r.probabilities.at({n, k});
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }

  const std::vector<int> bad{9};
  CHECK_THROWS_AS(softmax_cross_entropy(one, bad), ArgumentError);
  const std::vector<int> negative{-1};
  CHECK_THROWS_AS(softmax_cross_entropy(one, negative), ArgumentError);
}

TEST_CASE("L2 penalty") {
  TensorD w({1}, 2.0);
  const std::vector<const TensorD*> single{&w};
  CHECK(l2_penalty<double>(single, 0.0) == 0.0);
  CHECK(l2_penalty<double>(single, 0.5) == 2.0);

  TensorD grad({1}, 0.0);
  add_l2_gradient(w, 0.5, grad);
  CHECK(grad[0] == 2.0);  // 2 * lambda * w

  Rng rng(21);
  TensorD stack({42'380});
  for (auto& v : stack.data()) v = 0.01 * normal01(rng);
  const std::vector<const TensorD*> conv{&stack};
  const double expected = 1e-4 * 42'380 * 1e-4;
  CHECK(std::abs(l2_penalty<double>(conv, 1e-4) - expected) <= 0.2 * expected);
}

TEST_CASE("Adam") {
  SUBCASE("zero gradients leave parameters unchanged") {
    Rng rng(3);
    auto p = random_tensor({4, 2}, rng);
    const auto before = p;
    TensorD g({4, 2}, 0.0);
    AdamState<double> state;
    std::vector<TensorD*> ps{&p};
    std::vector<const TensorD*> gs{&g};
    for (int i = 0; i < 10; ++i) adam_step<double>(ps, gs, state);
    CHECK(p == before);
    CHECK(state.step_count == 10);
  }
  SUBCASE("first step on a scalar") {
    TensorD p({1}, 0.0);
    TensorD g({1}, 1.0);
    AdamState<double> state;
    std::vector<TensorD*> ps{&p};
    std::vector<const TensorD*> gs{&g};
    adam_step<double>(ps, gs, state);
    CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(state.step_count == 1);
  }
  SUBCASE("deterministic") {
    TensorD p1({3}, std::vector<double>{1, 2, 3}), p2 = p1;
    TensorD g({3}, std::vector<double>{0.1, -0.2, 0.3});
    AdamState<double> s1, s2;
    std::vector<TensorD*> a{&p1}, b{&p2};
    std::vector<const TensorD*> gs{&g};
    for (int i = 0; i < 3; ++i) {
      adam_step<double>(a, gs, s1);
      adam_step<double>(b, gs, s2);
    }
    CHECK(p1 == p2);
    CHECK(s1.first_moment == s2.first_moment);
  }
  SUBCASE("shape mismatch") {
    TensorD p({3});
    TensorD g({2});
    AdamState<double> state;
    std::vector<TensorD*> ps{&p};
    std::vector<const TensorD*> gs{&g};
    CHECK_THROWS_AS(adam_step<double>(ps, gs, state), ShapeError);
  }
}

TEST_CASE("layer gradients match finite differences") {
  const auto checks = check_layers();
  CHECK(checks.size() == 11);
  for (const auto& c : checks) {
    INFO(c.layer);
    require_pass(c.report);
  }
}

TEST_CASE("a corrupted layer gradient is detected") {
  GradCheckOptions opts;
  opts.gradient_perturbation = 1e-2;
  for (const auto& c : check_layers(opts)) {
    INFO(c.layer);
    CHECK_FALSE(c.report.passed);
  }
}

TEST_CASE("relative error uses the floor") {
  CHECK(relative_error(1.0, 1.0, 1e-6) == 0.0);
  CHECK(relative_error(2.0, 1.0, 1e-6) == doctest::Approx(0.5));
  CHECK(relative_error(1e-9, 0.0, 1e-6) == doctest::Approx(1e-3));
}
