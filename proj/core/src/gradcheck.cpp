#include "bytefam/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "bytefam/network.hpp"
#include "bytefam/random.hpp"

namespace bytefam {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const std::function<double()>& loss,
                                std::span<const GradientBlock> blocks,
                                const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (const auto& block : blocks) {
    TensorCheck check{block.name, 0, 0.0};
    for (std::size_t i = 0; i < block.values.size(); ++i) {
      const double saved = block.values[i];
      block.values[i] = saved + options.step;
      const double up = loss();
      block.values[i] = saved - options.step;
      const double down = loss();
      block.values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = block.analytic[i] + options.gradient_perturbation;
      check.max_rel_error = std::max(check.max_rel_error,
                                     relative_error(analytic, numeric, options.error_floor));
      ++check.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

GradCheckReport grad_check(const ModelConfig& config, const GradCheckOptions& options) {
  auto params = build_model<double>(config);
  Rng rng(derive_seed(options.seed, {0x6C}));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (!params.names[i].ends_with(".bias")) continue;
    for (auto& v : params.tensors[i].data()) v = uniform_real(rng, -options.bias_scale, options.bias_scale);
  }
  std::vector<std::vector<double>> inputs(options.batch, std::vector<double>(config.input_len));
  std::vector<int> labels(options.batch);
  for (std::size_t n = 0; n < options.batch; ++n) {
    for (auto& v : inputs[n]) v = uniform_real(rng, 0.0, options.input_scale);
    labels[n] = static_cast<int>(uniform_index(rng, config.num_classes));
  }
  std::vector<const double*> rows;
  for (const auto& in : inputs) rows.push_back(in.data());

  const std::uint64_t dropout_seed = derive_seed(options.seed, {0xD0});
  Network<double> net(params, 1);
  net.forward(rows, nn::Mode::Train, dropout_seed);
  const auto grads = net.backward(labels);

  auto loss = [&]() {
    net.forward(rows, nn::Mode::Train, dropout_seed);
    return net.loss(labels);
  };
  std::vector<GradientBlock> blocks;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    blocks.push_back({params.names[i], params.tensors[i].data(), grads.tensors[i].data()});
  }
  return check_gradients(loss, blocks, options);
}

ModelConfig toy_config(Architecture arch) {
  ModelConfig c = ModelConfig::reference(arch);
  c.input_len = 64;
  c.conv_filters = {3, 4, 5};
  c.kernel_width = 3;
  c.pool_width = 2;
  c.dense_units = 6;
  c.lstm_hidden = 4;
  c.seed = 11;
  return c;
}

}  // namespace bytefam
