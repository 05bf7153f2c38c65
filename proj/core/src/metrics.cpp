#include "bytefam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "bytefam/errors.hpp"

namespace bytefam {
namespace {

void check_inputs(const nn::Tensor<double>& probabilities, std::span<const int> labels) {
  nn::require_rank(probabilities, 2, "probabilities");
  if (probabilities.dim(0) != labels.size()) {
    throw ArgumentError("got " + std::to_string(probabilities.dim(0)) + " probability rows for " +
                        std::to_string(labels.size()) + " labels");
  }
  const auto k = static_cast<int>(probabilities.dim(1));
  for (int label : labels) {
    if (label < 0 || label >= k) throw ArgumentError("label " + std::to_string(label) + " out of range");
  }
}

nn::Tensor<double> widen(const nn::Tensor<float>& t) {
  return nn::Tensor<double>(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

}  // namespace

double average_log_loss(const nn::Tensor<double>& probabilities, std::span<const int> labels) {
  check_inputs(probabilities, labels);
  if (labels.empty()) return 0.0;
  const std::size_t k = probabilities.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probabilities[i * k + static_cast<std::size_t>(labels[i])],
                                kLogLossClip, 1.0 - kLogLossClip);
    total -= std::log(p);
  }
  return total / static_cast<double>(labels.size());
}

EvalReport compute_metrics(const nn::Tensor<double>& probabilities, std::span<const int> labels) {
  check_inputs(probabilities, labels);
  const std::size_t n = labels.size();
  const std::size_t k = probabilities.dim(1);
  EvalReport r;
  r.num_classes = k;
  r.count = n;
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = probabilities.ptr() + i * k;
    const auto pred = static_cast<std::size_t>(std::max_element(row, row + k) - row);
    ++r.confusion[static_cast<std::size_t>(labels[i])][pred];
  }

  std::size_t correct = 0;
  r.precision.assign(k, 0.0);
  r.recall.assign(k, 0.0);
  r.per_class_f1.assign(k, 0.0);
  r.f1_undefined.assign(k, false);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t tp = r.confusion[c][c];
    std::size_t actual = 0, predicted = 0;
    for (std::size_t j = 0; j < k; ++j) {
      actual += r.confusion[c][j];
      predicted += r.confusion[j][c];
    }
    correct += tp;
    if (actual == 0 && predicted == 0) {
      r.f1_undefined[c] = true;
      continue;
    }
    r.precision[c] = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    r.recall[c] = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    const double pr = r.precision[c] + r.recall[c];
    r.per_class_f1[c] = tp == 0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / pr;
  }
  r.micro_accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  double sum_f1 = 0.0;
  for (double f : r.per_class_f1) sum_f1 += f;
  r.macro_f1 = sum_f1 / static_cast<double>(k);
  r.avg_log_loss = average_log_loss(probabilities, labels);
  return r;
}

EvalReport compute_metrics(const nn::Tensor<float>& probabilities, std::span<const int> labels) {
  return compute_metrics(widen(probabilities), labels);
}

std::string format_report(const EvalReport& r, std::span<const std::string> class_names,
                          const std::string& title) {
  std::ostringstream out;
  out << title << '\n';
  out << std::string(title.size(), '=') << '\n';
  out << std::fixed << std::setprecision(4);
  out << "samples         " << r.count << '\n';
  out << "micro accuracy  " << r.micro_accuracy << '\n';
  out << "macro F1        " << r.macro_f1 << '\n';
  out << "avg log-loss    " << r.avg_log_loss << "\n\n";
  out << "class  name              precision  recall     F1\n";
  for (std::size_t c = 0; c < r.num_classes; ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    out << std::setw(5) << c << "  " << std::left << std::setw(16) << name << std::right << "  "
        << std::setw(9) << r.precision[c] << "  " << std::setw(9) << r.recall[c] << "  "
        << std::setw(6) << r.per_class_f1[c] << (r.f1_undefined[c] ? "  (no samples, F1 := 0)" : "")
        << '\n';
  }
  out << "\nconfusion (rows = true class, columns = predicted)\n";
  for (const auto& row : r.confusion) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << std::setw(6) << row[j];
    out << '\n';
  }
  return out.str();
}

std::string format_key_values(const EvalReport& r) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "count=" << r.count << '\n';
  out << "num_classes=" << r.num_classes << '\n';
  out << "micro_accuracy=" << r.micro_accuracy << '\n';
  out << "macro_f1=" << r.macro_f1 << '\n';
  out << "avg_log_loss=" << r.avg_log_loss << '\n';
  for (std::size_t c = 0; c < r.num_classes; ++c) {
    out << "f1." << c << '=' << r.per_class_f1[c] << '\n';
    out << "precision." << c << '=' << r.precision[c] << '\n';
    out << "recall." << c << '=' << r.recall[c] << '\n';
    if (r.f1_undefined[c]) out << "f1_undefined." << c << "=1\n";
  }
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    out << "confusion." << i << '=';
    for (std::size_t j = 0; j < r.confusion[i].size(); ++j) out << (j ? "," : "") << r.confusion[i][j];
    out << '\n';
  }
  return out.str();
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void write_history_header(std::ostream& out) {
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
}

void write_history_line(std::ostream& out, const EpochRecord& e) {
  out << e.epoch << ',' << std::setprecision(9) << e.train_loss << ',' << e.train_acc << ','
      << e.val_loss << ',' << e.val_acc << '\n';
  out.flush();
}

}  // namespace bytefam
