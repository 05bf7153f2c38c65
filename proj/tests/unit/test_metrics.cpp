#include <cmath>
#include <sstream>

#include "bytefam/errors.hpp"
#include "bytefam/metrics.hpp"
#include "doctest.h"

using namespace bytefam;
using nn::Tensor;

namespace {

Tensor<double> one_hot(const std::vector<int>& predicted, std::size_t classes) {
  Tensor<double> p({predicted.size(), classes}, 0.0);
  for (std::size_t i = 0; i < predicted.size(); ++i) p.at({i, static_cast<std::size_t>(predicted[i])}) = 1.0;
  return p;
}

}  // namespace

TEST_CASE("perfect predictions") {
  const std::vector<int> labels{0, 1, 2, 3, 4, 5, 6, 7, 8, 4};
  const auto r = compute_metrics(one_hot(labels, 9), labels);
  CHECK(r.micro_accuracy == 1.0);
  CHECK(r.macro_f1 == 1.0);
  for (double f : r.per_class_f1) CHECK(f == 1.0);
  CHECK(r.avg_log_loss < 1e-12);
}

TEST_CASE("hand-computed two-class F1") {
  // confusion [[1,1],[0,2]]
  const std::vector<int> labels{0, 0, 1, 1};
  const auto r = compute_metrics(one_hot({0, 1, 1, 1}, 2), labels);
  CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 2}});
  CHECK(r.per_class_f1[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class_f1[1] == doctest::Approx(0.8));
  CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0));
  CHECK(r.micro_accuracy == 0.75);
  CHECK(r.precision[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.recall[0] == 0.5);
}

TEST_CASE("uniform probabilities give ln 9") {
  Tensor<double> p({5, 9}, 1.0 / 9.0);
  const std::vector<int> labels{0, 3, 8, 2, 2};
  CHECK(compute_metrics(p, labels).avg_log_loss == doctest::Approx(std::log(9.0)));
  CHECK(average_log_loss(p, labels) == doctest::Approx(2.1972).epsilon(1e-4));
}

TEST_CASE("classes without instances or predictions are flagged") {
  const std::vector<int> labels{0, 1};
  const auto r = compute_metrics(one_hot({0, 1}, 3), labels);
  CHECK(r.f1_undefined == std::vector<bool>{false, false, true});
  CHECK(r.per_class_f1[2] == 0.0);
  CHECK(r.macro_f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("metric identities") {
  const std::vector<int> labels{0, 0, 1, 2, 2, 2, 1, 0};
  Tensor<double> p({8, 3}, std::vector<double>{0.7, 0.2, 0.1, 0.3, 0.4, 0.3, 0.1, 0.8, 0.1, 0.2, 0.2, 0.6,
                                               0.5, 0.1, 0.4, 0.3, 0.3, 0.4, 0.4, 0.4, 0.2, 0.6, 0.3, 0.1});
  const auto r = compute_metrics(p, labels);
  std::size_t trace = 0, sum = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      sum += r.confusion[i][j];
      if (i == j) trace += r.confusion[i][j];
    }
  }
  CHECK(r.micro_accuracy == doctest::Approx(static_cast<double>(trace) / static_cast<double>(sum)));
  CHECK(r.macro_f1 == doctest::Approx((r.per_class_f1[0] + r.per_class_f1[1] + r.per_class_f1[2]) / 3.0));
  // row 6 is an exact tie between classes 0 and 1: the lower index wins
  CHECK(r.confusion[1][0] == 1);

  auto better = p;
  better.at({1, 0}) = 0.5;
  better.at({1, 1}) = 0.2;
  CHECK(average_log_loss(better, labels) < average_log_loss(p, labels));
}

TEST_CASE("log-loss clipping") {
  Tensor<double> p({1, 2}, std::vector<double>{0.0, 1.0});
  const std::vector<int> labels{0};
  CHECK(average_log_loss(p, labels) == doctest::Approx(-std::log(1e-15)));
}

TEST_CASE("argument errors") {
  Tensor<double> p({2, 3}, 1.0 / 3.0);
  const std::vector<int> one{0};
  CHECK_THROWS_AS(compute_metrics(p, one), ArgumentError);
  const std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(compute_metrics(p, bad), ArgumentError);
}

TEST_CASE("report formats") {
  const std::vector<int> labels{0, 1, 1};
  const auto r = compute_metrics(one_hot({0, 1, 0}, 2), labels);
  const auto kv = parse_key_values(format_key_values(r));
  CHECK(std::stod(kv.at("micro_accuracy")) == doctest::Approx(r.micro_accuracy));
  CHECK(std::stod(kv.at("macro_f1")) == doctest::Approx(r.macro_f1));
  CHECK(kv.at("count") == "3");

  const std::vector<std::string> names{"alpha", "beta"};
  const auto text = format_report(r, names, "demo");
  CHECK(text.find("demo") != std::string::npos);
  CHECK(text.find("beta") != std::string::npos);

  std::ostringstream out;
  write_history_header(out);
  write_history_line(out, {1, 2.0, 0.25, 1.5, 0.5});
  CHECK(out.str().rfind("epoch,train_loss,train_acc,val_loss,val_acc\n1,2,0.25,1.5,0.5", 0) == 0);
}
