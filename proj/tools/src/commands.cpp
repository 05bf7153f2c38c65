#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "bytefam/errors.hpp"
#include "bytefam/ingest.hpp"
#include "bytefam/metrics.hpp"
#include "bytefam/model_io.hpp"
#include "bytefam/network.hpp"
#include "bytefam/parallel.hpp"
#include "bytefam/resample.hpp"

namespace bytefam::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// A bad invocation: missing input, bad flag value. Exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<std::string> family_names() {
  return {kFamilyNames.begin(), kFamilyNames.end()};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

void require_dir(const fs::path& p, const char* what) {
  if (p.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::is_directory(p)) throw UsageError(std::string(what) + " '" + p.string() + "' is not a directory");
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " '" + p.string() + "' not found");
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

void write_text(const fs::path& path, const std::string& text) { open_output(path) << text; }

void write_probability_row(std::ostream& out, std::span<const float> probs) {
  for (float p : probs) out << ',' << std::setprecision(9) << p;
}

/// Every flag any command accepts; unset flags leave the config untouched.
struct Overrides {
  std::string config;
  std::optional<std::string> data_dir, labels, cache_dir, model, output_dir;
  std::optional<std::string> mode, unknown_byte, precision, sampler_one, arch_one;
  std::vector<std::string> archs, samplers;
  std::optional<std::size_t> epochs, batch_size, folds, width;
  std::optional<double> subsample, learning_rate, val_fraction;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

std::vector<std::string> expand_all(const std::vector<std::string>& names,
                                    std::initializer_list<const char*> all) {
  std::vector<std::string> out;
  for (const auto& n : names) {
    if (n == "all" || n == "ALL") {
      out.insert(out.end(), all.begin(), all.end());
    } else {
      out.push_back(n);
    }
  }
  return out;
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.data_dir) c.paths.data_dir = *o.data_dir;
  if (o.labels) c.paths.labels = *o.labels;
  if (o.cache_dir) c.paths.cache_dir = *o.cache_dir;
  if (o.model) c.paths.model = *o.model;
  if (o.output_dir) c.paths.output_dir = *o.output_dir;
  if (o.mode || o.unknown_byte || o.precision) {
    // Route string enums through the config parser so the accepted spellings match.
    std::ostringstream j;
    j << "{";
    if (o.mode || o.unknown_byte) {
      j << "\"preprocess\":{";
      if (o.mode) j << "\"mode\":\"" << *o.mode << "\"";
      if (o.mode && o.unknown_byte) j << ",";
      if (o.unknown_byte) j << "\"unknown_byte\":\"" << *o.unknown_byte << "\"";
      j << "}";
    }
    if (o.precision) {
      if (o.mode || o.unknown_byte) j << ",";
      j << "\"train\":{\"precision\":\"" << *o.precision << "\"}";
    }
    j << "}";
    const auto parsed = parse_run_config(j.str());
    if (o.mode) c.preprocess.mode = parsed.preprocess.mode;
    if (o.unknown_byte) c.preprocess.unknown = parsed.preprocess.unknown;
    if (o.precision) c.train.precision = parsed.train.precision;
  }
  if (o.arch_one) c.model.architecture = parse_architecture(*o.arch_one);
  if (o.sampler_one) c.train.sampler = parse_sampler_mode(*o.sampler_one);
  if (!o.archs.empty()) {
    c.cv.architectures.clear();
    for (const auto& n : expand_all(o.archs, {"CNN", "CNN_UNILSTM", "CNN_BILSTM"}))
      c.cv.architectures.push_back(parse_architecture(n));
  }
  if (!o.samplers.empty()) {
    c.cv.samplers.clear();
    for (const auto& n : expand_all(o.samplers, {"default", "rebalance"}))
      c.cv.samplers.push_back(parse_sampler_mode(n));
  }
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.folds) c.cv.folds = *o.folds;
  if (o.width) c.visualize.width = *o.width;
  if (o.subsample) c.cv.subsample = *o.subsample;
  if (o.learning_rate) c.train.adam.learning_rate = *o.learning_rate;
  if (o.val_fraction) c.final_model.val_fraction = *o.val_fraction;
  if (o.seed) {
    c.train.seed = *o.seed;
    c.model.seed = *o.seed;
  }
  if (o.threads) c.threads = *o.threads;
  c.train.threads = c.threads;
  c.validate();
  return c;
}

// -- preprocess ----------------------------------------------------------------

int cmd_preprocess(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_dir(cfg.paths.data_dir, "--data-dir");
  if (cfg.paths.cache_dir.empty()) throw UsageError("--cache-dir is required");
  fs::create_directories(cfg.paths.cache_dir);
  write_run_config(cfg, cfg.paths.cache_dir / "effective_config.json");

  const auto files = list_sample_files(cfg.paths.data_dir);
  std::vector<std::pair<std::string, fs::path>> items(files.begin(), files.end());
  enum class Result { Converted, Cached, Failed };
  std::vector<Result> results(items.size(), Result::Failed);
  std::vector<std::string> messages(items.size());
  std::vector<double> seconds(items.size(), 0.0);
  const HexDumpOptions hex{cfg.preprocess.unknown};

  const auto t0 = Clock::now();
  parallel_for(items.size(), cfg.threads, [&](std::size_t i) {
    const auto& [id, path] = items[i];
    try {
      try {
        const auto cached = read_cache(cfg.paths.cache_dir, id);
        if (cached && cached->values.size() == cfg.model.input_len) {
          results[i] = Result::Cached;
          return;
        }
      } catch (const FormatError&) {
        // Unreadable record: rebuild it.
      }
      const auto start = Clock::now();
      write_cache(cfg.paths.cache_dir,
                  resample(read_sample(path, hex), cfg.model.input_len, cfg.preprocess.mode));
      seconds[i] = seconds_since(start);
      results[i] = Result::Converted;
    } catch (const std::exception& e) {
      messages[i] = e.what();
    }
  });
  const double wall = seconds_since(t0);

  std::size_t converted = 0, cached = 0, failed = 0;
  double convert_time = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    switch (results[i]) {
      case Result::Converted: ++converted; convert_time += seconds[i]; break;
      case Result::Cached: ++cached; break;
      case Result::Failed:
        ++failed;
        err << "failed: " << items[i].first << ": " << messages[i] << "\n";
        break;
    }
  }
  out << "preprocessed " << converted << " files (" << cached << " already cached, " << failed
      << " failed) in " << std::fixed << std::setprecision(3) << wall << " s";
  if (converted > 0) out << ", " << std::setprecision(4) << convert_time / converted << " s/file";
  out << "\n" << std::defaultfloat;
  return failed == 0 ? kExitOk : kExitFailure;
}

// -- stats -----------------------------------------------------------------------

int cmd_stats(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_dir(cfg.paths.data_dir, "--data-dir");
  std::vector<std::string> ids;
  std::vector<fs::path> paths;
  std::vector<std::optional<int>> labels;
  if (!cfg.paths.labels.empty()) {
    require_file(cfg.paths.labels, "--labels");
    for (const auto& e : scan_corpus(cfg.paths.data_dir, cfg.paths.labels)) {
      ids.push_back(e.sample_id);
      paths.push_back(e.path);
      labels.emplace_back(e.label);
    }
  } else {
    for (const auto& [id, path] : list_sample_files(cfg.paths.data_dir)) {
      ids.push_back(id);
      paths.push_back(path);
      labels.emplace_back();
    }
  }

  std::vector<SampleSummary> summaries(paths.size());
  std::vector<std::string> failures(paths.size());
  const HexDumpOptions hex{cfg.preprocess.unknown};
  parallel_for(paths.size(), cfg.threads, [&](std::size_t i) {
    try {
      summaries[i] = {labels[i], read_sample(paths[i], hex).original_length()};
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });
  std::vector<SampleSummary> ok;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (failures[i].empty()) {
      ok.push_back(summaries[i]);
    } else {
      ++failed;
      err << "failed: " << ids[i] << ": " << failures[i] << "\n";
    }
  }
  const auto stats = corpus_stats(ok);

  out << "samples: " << stats.total << "\n";
  if (!cfg.paths.labels.empty()) {
    out << "class  family            count\n";
    for (int c = 0; c < static_cast<int>(kNumFamilies); ++c) {
      const auto it = stats.per_class_counts.find(c);
      out << std::left << std::setw(7) << c + 1 << std::setw(18) << family_name(c) << std::right
          << (it == stats.per_class_counts.end() ? 0 : it->second) << "\n";
    }
  }
  out << "size histogram (KB bucket: count)\n";
  for (const auto& [kb, n] : stats.size_histogram_kb) out << "  " << kb << ": " << n << "\n";

  if (!cfg.paths.output_dir.empty()) {
    write_run_config(cfg, cfg.paths.output_dir / "effective_config.json");
    auto counts = open_output(cfg.paths.output_dir / "class_counts.csv");
    counts << "class,family,count\n";
    for (int c = 0; c < static_cast<int>(kNumFamilies); ++c) {
      const auto it = stats.per_class_counts.find(c);
      counts << c + 1 << ',' << family_name(c) << ','
             << (it == stats.per_class_counts.end() ? 0 : it->second) << "\n";
    }
    auto hist = open_output(cfg.paths.output_dir / "size_histogram.csv");
    hist << "size_kb,count\n";
    for (const auto& [kb, n] : stats.size_histogram_kb) hist << kb << ',' << n << "\n";
  }
  return failed == 0 ? kExitOk : kExitFailure;
}

// -- shared dataset loading ---------------------------------------------------

void require_corpus(const RunConfig& cfg) {
  require_dir(cfg.paths.data_dir, "--data-dir");
  require_file(cfg.paths.labels, "--labels");
}

void write_history_file_line(const fs::path& path, const EpochRecord& r) {
  const bool fresh = !fs::exists(path);
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("cannot write " + path.string());
  if (fresh) write_history_header(f);
  write_history_line(f, r);
}

void print_epoch(std::ostream& out, const std::string& prefix, const EpochRecord& r) {
  out << prefix << "epoch " << r.epoch << " train_loss " << r.train_loss << " train_acc "
      << r.train_acc << " val_loss " << r.val_loss << " val_acc " << r.val_acc << std::endl;
}

void write_report_files(const fs::path& dir, const EvalReport& report, const std::string& title) {
  const auto names = family_names();
  write_text(dir / "report.txt", format_report(report, names, title));
  write_text(dir / "report.kv", format_key_values(report));
}

// -- cv --------------------------------------------------------------------------

int cmd_cv(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_corpus(cfg);
  if (cfg.paths.output_dir.empty()) throw UsageError("--output-dir is required");
  write_run_config(cfg, cfg.paths.output_dir / "effective_config.json");

  Dataset data = load_dataset(cfg, out);
  if (cfg.cv.subsample < 1.0) {
    const auto idx = stratified_subsample(data.labels(), cfg.cv.subsample, cfg.train.seed);
    data = data.subset(idx);
    out << "stratified subsample " << cfg.cv.subsample << ": " << data.size() << " samples\n";
  }

  auto summary = open_output(cfg.paths.output_dir / "cv_summary.csv");
  summary << "architecture,sampler,samples,accuracy,macro_f1,avg_log_loss";
  for (auto name : kFamilyNames) summary << ",f1_" << name;
  summary << "\n";

  for (auto arch : cfg.cv.architectures) {
    for (auto sampler : cfg.cv.samplers) {
      ModelConfig model = cfg.model;
      model.architecture = arch;
      TrainConfig train = cfg.train;
      train.sampler = sampler;
      const std::string tag = std::string(to_string(arch)) + "_" + std::string(to_string(sampler));
      const fs::path dir = cfg.paths.output_dir / tag;
      fs::create_directories(dir);
      for (std::size_t f = 0; f < cfg.cv.folds; ++f)
        fs::remove(dir / ("fold" + std::to_string(f) + "_history.csv"));

      CvHooks hooks;
      hooks.on_epoch = [&](std::size_t fold, const EpochRecord& r) {
        write_history_file_line(dir / ("fold" + std::to_string(fold) + "_history.csv"), r);
        print_epoch(out, tag + " fold " + std::to_string(fold) + " ", r);
      };
      out << "cross-validating " << tag << " (" << cfg.cv.folds << " folds, " << data.size()
          << " samples)" << std::endl;
      const auto result = cross_validate(data, model, train, cfg.cv.folds, hooks);
      for (const auto& w : result.folds.warnings) err << "warning: " << w << "\n";

      write_report_files(dir, result.report, tag + " cross-validation");
      auto oof = open_output(dir / "out_of_fold.csv");
      oof << "id,label,fold";
      for (auto name : kFamilyNames) oof << ',' << name;
      oof << "\n";
      const std::size_t k = result.out_of_fold.dim(1);
      for (std::size_t i = 0; i < data.size(); ++i) {
        oof << csv_field(data.ids()[i]) << ',' << data.labels()[i] + 1 << ','
            << result.folds.fold_of[i];
        write_probability_row(oof, {result.out_of_fold.ptr() + i * k, k});
        oof << "\n";
      }

      const auto& r = result.report;
      summary << to_string(arch) << ',' << to_string(sampler) << ',' << r.count << ','
              << std::setprecision(6) << r.micro_accuracy << ',' << r.macro_f1 << ','
              << r.avg_log_loss;
      for (double f1 : r.per_class_f1) summary << ',' << f1;
      summary << "\n" << std::flush;
      out << tag << ": accuracy " << r.micro_accuracy << " macro_f1 " << r.macro_f1
          << " avg_log_loss " << r.avg_log_loss << std::endl;
    }
  }
  return kExitOk;
}

// -- train -----------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  require_corpus(cfg);
  if (cfg.paths.output_dir.empty()) throw UsageError("--output-dir is required");
  const fs::path model_path =
      cfg.paths.model.empty() ? cfg.paths.output_dir / "model.bcnn" : cfg.paths.model;
  write_run_config(cfg, cfg.paths.output_dir / "effective_config.json");

  const Dataset data = load_dataset(cfg, out);
  const fs::path history = cfg.paths.output_dir / "history.csv";
  fs::remove(history);
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r, const ModelParams<float>&) {
    write_history_file_line(history, r);
    print_epoch(out, "", r);
    return true;
  };
  const auto result = train_final(data, cfg.model, cfg.train, cfg.final_model.val_fraction, hooks);
  save_model(result.training.params, model_path);
  write_report_files(cfg.paths.output_dir, result.validation,
                     "validation split, epoch " + std::to_string(result.training.selected_epoch));
  out << "selected epoch " << result.training.selected_epoch << ": val_loss "
      << result.validation.avg_log_loss << " val_acc " << result.validation.micro_accuracy
      << "\nmodel written to " << model_path.string() << "\n";
  return kExitOk;
}

// -- predict ---------------------------------------------------------------------

struct PredictInput {
  std::string id;
  fs::path path;
};

std::vector<PredictInput> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<PredictInput> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      for (const auto& [id, path] : list_sample_files(p)) out.push_back({id, path});
    } else {
      out.push_back({p.stem().string(), p});
    }
  }
  return out;
}

int cmd_predict(const RunConfig& cfg, const std::vector<std::string>& inputs,
                const std::string& output, const std::string& submission, std::ostream& out,
                std::ostream& err) {
  require_file(cfg.paths.model, "--model");
  if (inputs.empty()) throw UsageError("no input files given");
  const auto files = expand_inputs(inputs);
  const auto params = load_model(cfg.paths.model);
  const std::size_t len = params.config.input_len;
  const std::size_t classes = params.config.num_classes;

  if (!cfg.paths.output_dir.empty()) {
    write_run_config(cfg, cfg.paths.output_dir / "effective_config.json");
  } else if (!output.empty()) {
    write_run_config(cfg, fs::path(output).parent_path() / "effective_config.json");
  } else if (!submission.empty()) {
    write_run_config(cfg, fs::path(submission).parent_path() / "effective_config.json");
  }

  std::vector<std::vector<float>> probs(files.size());
  std::vector<std::string> errors(files.size());
  std::vector<double> convert_s(files.size(), 0.0), predict_s(files.size(), 0.0);
  const HexDumpOptions hex{cfg.preprocess.unknown};
  const auto t0 = Clock::now();
  parallel_for(files.size(), cfg.threads, [&](std::size_t i) {
    try {
      auto start = Clock::now();
      auto seq = resample(read_sample(files[i].path, hex), len, cfg.preprocess.mode);
      convert_s[i] = seconds_since(start);
      start = Clock::now();
      const nn::Tensor<float> batch({1, len}, std::move(seq.values));
      const auto p = predict_proba(params, batch, 1);
      probs[i].assign(p.data().begin(), p.data().end());
      predict_s[i] = seconds_since(start);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  const double wall = seconds_since(t0);

  std::ofstream file_out;
  if (!output.empty()) file_out = open_output(output);
  std::ostream& rows = output.empty() ? out : file_out;
  rows << "id,family";
  for (std::size_t c = 0; c < classes; ++c)
    rows << ',' << (classes == kNumFamilies ? std::string(kFamilyNames[c]) : "class" + std::to_string(c + 1));
  rows << "\n";

  std::size_t failed = 0;
  std::vector<std::string> ok_ids;
  std::vector<float> ok_probs;
  double convert_total = 0.0, predict_total = 0.0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      rows << csv_field(files[i].id) << ",#ERROR," << csv_field(errors[i]) << "\n";
      err << "failed: " << files[i].path.string() << ": " << errors[i] << "\n";
      continue;
    }
    const int cls = static_cast<int>(
        std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin());
    rows << csv_field(files[i].id) << ','
         << (classes == kNumFamilies ? std::string(family_name(cls)) : std::to_string(cls + 1));
    write_probability_row(rows, probs[i]);
    rows << "\n";
    ok_ids.push_back(files[i].id);
    ok_probs.insert(ok_probs.end(), probs[i].begin(), probs[i].end());
    convert_total += convert_s[i];
    predict_total += predict_s[i];
  }
  rows.flush();

  if (!submission.empty()) {
    auto sub = open_output(submission);
    const nn::Tensor<float> table({ok_ids.size(), classes}, std::move(ok_probs));
    write_submission(sub, ok_ids, table);
  }

  const std::size_t ok = files.size() - failed;
  err << "predicted " << ok << " of " << files.size() << " files in " << std::fixed
      << std::setprecision(3) << wall << " s";
  if (ok > 0) {
    err << " (convert " << std::setprecision(4) << convert_total / ok << " s/file, predict "
        << predict_total / ok << " s/file, end-to-end " << wall / files.size() << " s/file)";
  }
  err << "\n" << std::defaultfloat;
  return failed == 0 ? kExitOk : kExitFailure;
}

// -- visualize -------------------------------------------------------------------

int cmd_visualize(const RunConfig& cfg, const std::string& input, const std::string& output,
                  std::ostream& out) {
  require_file(input, "input sample");
  const auto seq = resample(read_sample(input, {cfg.preprocess.unknown}), cfg.model.input_len,
                            cfg.preprocess.mode);
  fs::path target = output;
  if (target.empty()) {
    const fs::path dir = cfg.paths.output_dir.empty() ? fs::path(".") : cfg.paths.output_dir;
    target = dir / (seq.sample_id + ".pgm");
  }
  const auto pgm = export_pgm(seq.values, cfg.visualize.width);
  auto f = open_output(target);
  f.write(reinterpret_cast<const char*>(pgm.data()), static_cast<std::streamsize>(pgm.size()));
  if (!f) throw IoError("cannot write " + target.string());
  write_run_config(cfg, target.parent_path() / "effective_config.json");
  out << "wrote " << target.string() << " (" << cfg.visualize.width << " x "
      << (seq.values.size() + cfg.visualize.width - 1) / cfg.visualize.width << ")\n";
  return kExitOk;
}

// -- export-submission -------------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  return fields;
}

int cmd_export_submission(const RunConfig& cfg, const std::string& predictions,
                          const std::string& output, std::ostream& out, std::ostream& err) {
  require_file(predictions, "--predictions");
  if (output.empty()) throw UsageError("--output is required");
  std::ifstream in(predictions);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(predictions + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "family")
    throw FormatError(predictions + ": expected a header starting with id,family");
  const std::size_t classes = header.size() - 2;

  std::vector<std::string> ids;
  std::vector<float> values;
  std::size_t failed = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() >= 2 && fields[1] == "#ERROR") {
      ++failed;
      err << "skipped " << fields[0] << ": prediction failed\n";
      continue;
    }
    if (fields.size() != header.size())
      throw FormatError(predictions + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields");
    ids.push_back(fields[0]);
    for (std::size_t c = 0; c < classes; ++c) {
      try {
        values.push_back(std::stof(fields[2 + c]));
      } catch (const std::exception&) {
        throw FormatError(predictions + ":" + std::to_string(line_no) + ": bad probability '" +
                          fields[2 + c] + "'");
      }
    }
  }
  const nn::Tensor<float> table({ids.size(), classes}, std::move(values));
  auto sub = open_output(output);
  write_submission(sub, ids, table);
  write_run_config(cfg, fs::path(output).parent_path() / "effective_config.json");
  out << "wrote " << ids.size() << " rows to " << output << "\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

// -- flag wiring -------------------------------------------------------------------

void add_paths(CLI::App& cmd, Overrides& o, bool data, bool labels, bool cache, bool output) {
  if (data) cmd.add_option("--data-dir", o.data_dir, "Directory of sample files");
  if (labels) cmd.add_option("--labels", o.labels, "Labels table (Id,Class)");
  if (cache) cmd.add_option("--cache-dir", o.cache_dir, "Preprocessed-sequence cache");
  if (output) cmd.add_option("--output-dir", o.output_dir, "Directory for reports and logs");
}

void add_preprocess_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--mode", o.mode, "Resampling: linear or area");
  cmd.add_option("--unknown-byte", o.unknown_byte, "Unreadable byte tokens: zero or drop");
}

void add_train_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--epochs", o.epochs, "Training epochs");
  cmd.add_option("--batch-size", o.batch_size, "Batch size");
  cmd.add_option("--learning-rate", o.learning_rate, "Adam learning rate");
  cmd.add_option("--seed", o.seed, "Seed for initialization, folds, batches and dropout");
  cmd.add_option("--precision", o.precision, "float32 or float64");
}

}  // namespace

Dataset load_dataset(const RunConfig& cfg, std::ostream& log) {
  const auto entries = scan_corpus(cfg.paths.data_dir, cfg.paths.labels);
  const std::size_t len = cfg.model.input_len;
  const bool use_cache = !cfg.paths.cache_dir.empty();
  const HexDumpOptions hex{cfg.preprocess.unknown};
  Dataset data(len);
  data.reserve(entries.size());

  const auto t0 = Clock::now();
  std::size_t hits = 0;
  constexpr std::size_t kChunk = 512;
  for (std::size_t begin = 0; begin < entries.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, entries.size() - begin);
    std::vector<std::vector<float>> rows(n);
    std::vector<char> hit(n, 0);
    parallel_for(n, cfg.threads, [&](std::size_t j) {
      const auto& e = entries[begin + j];
      if (use_cache) {
        try {
          auto cached = read_cache(cfg.paths.cache_dir, e.sample_id);
          if (cached && cached->values.size() == len) {
            rows[j] = std::move(cached->values);
            hit[j] = 1;
            return;
          }
        } catch (const FormatError&) {
          // Rebuilt below.
        }
      }
      auto seq = resample(read_sample(e.path, hex), len, cfg.preprocess.mode);
      if (use_cache) write_cache(cfg.paths.cache_dir, seq);
      rows[j] = std::move(seq.values);
    });
    for (std::size_t j = 0; j < n; ++j) {
      data.add(entries[begin + j].sample_id, rows[j], entries[begin + j].label);
      hits += static_cast<std::size_t>(hit[j]);
    }
  }
  log << "loaded " << data.size() << " samples (" << hits << " from cache) in " << std::fixed
      << std::setprecision(2) << seconds_since(t0) << " s\n"
      << std::defaultfloat;
  return data;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Malware family classification from raw bytes", "bytefam"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "JSON run configuration; flags override its values");
  app.add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* pre = app.add_subcommand("preprocess", "Resample every sample into the cache");
  add_paths(*pre, o, true, false, true, false);
  add_preprocess_flags(*pre, o);

  auto* stats = app.add_subcommand("stats", "Per-class counts and file-size histogram");
  add_paths(*stats, o, true, true, false, true);
  add_preprocess_flags(*stats, o);

  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  add_paths(*cv, o, true, true, true, true);
  add_preprocess_flags(*cv, o);
  add_train_flags(*cv, o);
  cv->add_option("--arch", o.archs, "Architectures (CNN, CNN_UNILSTM, CNN_BILSTM, all)");
  cv->add_option("--sampler", o.samplers, "Batch samplers (default, rebalance, all)");
  cv->add_option("--folds", o.folds, "Number of folds");
  cv->add_option("--subsample", o.subsample, "Stratified fraction of the corpus to use");

  auto* train = app.add_subcommand("train", "Train the final model on a 90/10 split");
  add_paths(*train, o, true, true, true, true);
  add_preprocess_flags(*train, o);
  add_train_flags(*train, o);
  train->add_option("--arch", o.arch_one, "Architecture");
  train->add_option("--sampler", o.sampler_one, "Batch sampler");
  train->add_option("--val-fraction", o.val_fraction, "Validation share of the corpus");
  train->add_option("--model", o.model, "Output weight file (default <output-dir>/model.bcnn)");

  std::vector<std::string> predict_inputs;
  std::string predict_output, submission;
  auto* predict = app.add_subcommand("predict", "Classify sample files");
  predict->add_option("inputs", predict_inputs, "Sample files or directories")->required();
  predict->add_option("--model", o.model, "Weight file");
  predict->add_option("--output", predict_output, "Prediction CSV (default stdout)");
  predict->add_option("--submission", submission, "Also write a submission file");
  predict->add_option("--output-dir", o.output_dir, "Where the effective config is written");
  add_preprocess_flags(*predict, o);

  std::string visualize_input, visualize_output;
  auto* visualize = app.add_subcommand("visualize", "Write a sample as a greyscale PGM image");
  visualize->add_option("input", visualize_input, "Sample file")->required();
  visualize->add_option("--width", o.width, "Image width in pixels");
  visualize->add_option("--output", visualize_output, "PGM path (default <output-dir>/<id>.pgm)");
  visualize->add_option("--output-dir", o.output_dir, "Output directory");
  add_preprocess_flags(*visualize, o);

  std::string predictions_csv, export_output;
  auto* exporter = app.add_subcommand("export-submission", "Convert predictions to a submission file");
  exporter->add_option("--predictions", predictions_csv, "CSV written by predict");
  exporter->add_option("--output", export_output, "Submission file");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (pre->parsed()) return cmd_preprocess(cfg, out, err);
    if (stats->parsed()) return cmd_stats(cfg, out, err);
    if (cv->parsed()) return cmd_cv(cfg, out, err);
    if (train->parsed()) return cmd_train(cfg, out, err);
    if (predict->parsed())
      return cmd_predict(cfg, predict_inputs, predict_output, submission, out, err);
    if (visualize->parsed()) return cmd_visualize(cfg, visualize_input, visualize_output, out);
    if (exporter->parsed())
      return cmd_export_submission(cfg, predictions_csv, export_output, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace bytefam::cli
