#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bytefam/nn/tensor.hpp"

namespace bytefam {

/// One line of the training history log.
struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct EvalReport {
  std::size_t num_classes = 0;
  std::size_t count = 0;
  double micro_accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> per_class_f1;
  /// True where a class has neither instances nor predictions (F1 set to 0).
  std::vector<bool> f1_undefined;
  double macro_f1 = 0.0;
  double avg_log_loss = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted]
  std::vector<EpochRecord> history;
};

inline constexpr double kLogLossClip = 1e-15;

/// `probabilities` is [N x K]. Predictions are row argmaxes (lowest index on
/// ties). Log-loss clips probabilities to [1e-15, 1 - 1e-15].
/// Throws ArgumentError on a row/label count mismatch or bad label.
EvalReport compute_metrics(const nn::Tensor<double>& probabilities, std::span<const int> labels);
EvalReport compute_metrics(const nn::Tensor<float>& probabilities, std::span<const int> labels);

/// Mean clipped negative log-probability of the true class.
double average_log_loss(const nn::Tensor<double>& probabilities, std::span<const int> labels);

/// Human-readable report. `class_names` may be empty (indices are printed).
std::string format_report(const EvalReport& report, std::span<const std::string> class_names,
                          const std::string& title);

/// `key=value` lines for machine consumption.
std::string format_key_values(const EvalReport& report);

/// Parses what format_key_values writes (scalar keys only).
std::map<std::string, std::string> parse_key_values(const std::string& text);

void write_history_header(std::ostream& out);
void write_history_line(std::ostream& out, const EpochRecord& record);

}  // namespace bytefam
