#pragma once

// Finite-difference verification of analytic gradients (64-bit).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bytefam/models.hpp"

namespace bytefam {

struct GradCheckOptions {
  std::size_t batch = 2;
  double step = 1e-5;          ///< central-difference half width
  double tolerance = 1e-4;
  double error_floor = 1e-6;   ///< denominator floor for near-zero gradients
  double input_scale = 1.0;    ///< toy inputs are uniform in [0, input_scale]
  /// Biases are redrawn uniform in [-bias_scale, bias_scale] so that no unit
  /// sits exactly on a ReLU kink (zero-initialized biases put dead-input
  /// positions at exactly 0).
  double bias_scale = 0.1;
  std::uint64_t seed = 7;
  /// Added to every analytic gradient entry; a nonzero value is a negative control.
  double gradient_perturbation = 0.0;
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

/// A parameter block whose entries are perturbed in place while `loss` is
/// re-evaluated.
struct GradientBlock {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

/// Compares each analytic entry against (loss(x+h) - loss(x-h)) / 2h.
GradCheckReport check_gradients(const std::function<double()>& loss,
                                std::span<const GradientBlock> blocks,
                                const GradCheckOptions& options);

/// Builds `config` in double precision, draws a toy batch and labels, and
/// checks every parameter of the full model (dropout active with fixed masks,
/// L2 penalty included).
GradCheckReport grad_check(const ModelConfig& config, const GradCheckOptions& options = {});

struct LayerCheck {
  std::string layer;
  GradCheckReport report;
};

/// Every layer in isolation at small random shapes: conv1d, maxpool, relu,
/// dense, LSTM (both directions, with and without per-step outputs),
/// dropout, softmax cross-entropy, L2 penalty. Each scalar loss is a random
/// projection of the layer output.
std::vector<LayerCheck> check_layers(const GradCheckOptions& options = {});

/// Small shapes for each architecture that keep the full check fast:
/// input length 64, kernel 3, pool 2.
ModelConfig toy_config(Architecture arch);

}  // namespace bytefam
