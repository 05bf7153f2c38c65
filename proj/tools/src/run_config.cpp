#include "run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>
#include <type_traits>

#include "bytefam/errors.hpp"
#include "json.hpp"

namespace bytefam::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& j, const char* section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) throw ConfigError(std::string(section) + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
bool has_type(const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v.is_boolean();
  } else if constexpr (std::is_unsigned_v<T>) {
    return v.is_number_unsigned();
  } else if constexpr (std::is_integral_v<T>) {
    return v.is_number_integer();
  } else if constexpr (std::is_floating_point_v<T>) {
    return v.is_number();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v.is_string();
  } else {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!has_type<typename T::value_type>(e)) return false;
    return true;
  }
}

template <typename T>
void read(const json& j, const char* key, T& value) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!has_type<T>(v)) throw ConfigError(std::string("bad value for '") + key + "': " + v.dump());
  value = v.get<T>();
}

void read_path(const json& j, const char* key, fs::path& value) {
  std::string s = value.string();
  read(j, key, s);
  value = s;
}

std::string_view resample_mode_name(ResampleMode m) {
  return m == ResampleMode::Area ? "area" : "linear";
}

ResampleMode parse_resample_mode(const std::string& s) {
  if (s == "linear") return ResampleMode::Linear;
  if (s == "area") return ResampleMode::Area;
  throw ConfigError("resample mode must be 'linear' or 'area', got '" + s + "'");
}

std::string_view unknown_byte_name(UnknownByte u) { return u == UnknownByte::Drop ? "drop" : "zero"; }

UnknownByte parse_unknown_byte(const std::string& s) {
  if (s == "zero") return UnknownByte::Zero;
  if (s == "drop") return UnknownByte::Drop;
  throw ConfigError("unknown_byte must be 'zero' or 'drop', got '" + s + "'");
}

std::string_view precision_name(Precision p) { return p == Precision::Float64 ? "float64" : "float32"; }

Precision parse_precision(const std::string& s) {
  if (s == "float32") return Precision::Float32;
  if (s == "float64") return Precision::Float64;
  throw ConfigError("precision must be 'float32' or 'float64', got '" + s + "'");
}

SamplerMode parse_sampler(const std::string& s) {
  try {
    return parse_sampler_mode(s);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void from_json_model(const json& j, ModelConfig& m) {
  check_keys(j, "model",
             {"architecture", "input_len", "conv_filters", "kernel_width", "pool_width",
              "dense_units", "lstm_hidden", "num_classes", "dropout_dense", "dropout_lstm",
              "l2_lambda", "seed"});
  std::string arch(to_string(m.architecture));
  read(j, "architecture", arch);
  m.architecture = parse_architecture(arch);
  read(j, "input_len", m.input_len);
  read(j, "conv_filters", m.conv_filters);
  read(j, "kernel_width", m.kernel_width);
  read(j, "pool_width", m.pool_width);
  read(j, "dense_units", m.dense_units);
  read(j, "lstm_hidden", m.lstm_hidden);
  read(j, "num_classes", m.num_classes);
  read(j, "dropout_dense", m.dropout_dense);
  read(j, "dropout_lstm", m.dropout_lstm);
  read(j, "l2_lambda", m.l2_lambda);
  read(j, "seed", m.seed);
}

json to_json_model(const ModelConfig& m) {
  return {{"architecture", to_string(m.architecture)},
          {"input_len", m.input_len},
          {"conv_filters", m.conv_filters},
          {"kernel_width", m.kernel_width},
          {"pool_width", m.pool_width},
          {"dense_units", m.dense_units},
          {"lstm_hidden", m.lstm_hidden},
          {"num_classes", m.num_classes},
          {"dropout_dense", m.dropout_dense},
          {"dropout_lstm", m.dropout_lstm},
          {"l2_lambda", m.l2_lambda},
          {"seed", m.seed}};
}

void from_json_train(const json& j, TrainConfig& t) {
  check_keys(j, "train",
             {"epochs", "batch_size", "sampler", "quota_batches", "learning_rate", "beta1",
              "beta2", "epsilon", "seed", "precision", "track_validation"});
  read(j, "epochs", t.epochs);
  read(j, "batch_size", t.batch_size);
  std::string sampler(to_string(t.sampler));
  read(j, "sampler", sampler);
  t.sampler = parse_sampler(sampler);
  read(j, "quota_batches", t.quota_batches);
  read(j, "learning_rate", t.adam.learning_rate);
  read(j, "beta1", t.adam.beta1);
  read(j, "beta2", t.adam.beta2);
  read(j, "epsilon", t.adam.epsilon);
  read(j, "seed", t.seed);
  std::string precision(precision_name(t.precision));
  read(j, "precision", precision);
  t.precision = parse_precision(precision);
  read(j, "track_validation", t.track_validation);
}

json to_json_train(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"sampler", to_string(t.sampler)},
          {"quota_batches", t.quota_batches},
          {"learning_rate", t.adam.learning_rate},
          {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"epsilon", t.adam.epsilon},
          {"seed", t.seed},
          {"precision", precision_name(t.precision)},
          {"track_validation", t.track_validation}};
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (cv.folds < 2) throw ConfigError("cv.folds must be at least 2");
  if (!(cv.subsample > 0.0 && cv.subsample <= 1.0))
    throw ConfigError("cv.subsample must be in (0, 1]");
  if (cv.architectures.empty()) throw ConfigError("cv.architectures is empty");
  if (cv.samplers.empty()) throw ConfigError("cv.samplers is empty");
  if (!(final_model.val_fraction > 0.0 && final_model.val_fraction < 1.0))
    throw ConfigError("final.val_fraction must be in (0, 1)");
  if (visualize.width < 1) throw ConfigError("visualize.width must be at least 1");
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  check_keys(j, "config",
             {"paths", "preprocess", "model", "train", "cv", "final", "visualize", "threads"});
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, "paths", {"data_dir", "labels", "cache_dir", "model", "output_dir"});
    read_path(p, "data_dir", c.paths.data_dir);
    read_path(p, "labels", c.paths.labels);
    read_path(p, "cache_dir", c.paths.cache_dir);
    read_path(p, "model", c.paths.model);
    read_path(p, "output_dir", c.paths.output_dir);
  }
  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    check_keys(p, "preprocess", {"mode", "unknown_byte"});
    std::string mode(resample_mode_name(c.preprocess.mode));
    std::string unknown(unknown_byte_name(c.preprocess.unknown));
    read(p, "mode", mode);
    read(p, "unknown_byte", unknown);
    c.preprocess.mode = parse_resample_mode(mode);
    c.preprocess.unknown = parse_unknown_byte(unknown);
  }
  if (j.contains("model")) from_json_model(j.at("model"), c.model);
  if (j.contains("train")) from_json_train(j.at("train"), c.train);
  if (j.contains("cv")) {
    const auto& v = j.at("cv");
    check_keys(v, "cv", {"folds", "subsample", "architectures", "samplers"});
    read(v, "folds", c.cv.folds);
    read(v, "subsample", c.cv.subsample);
    if (v.contains("architectures")) {
      std::vector<std::string> names;
      read(v, "architectures", names);
      c.cv.architectures.clear();
      for (const auto& n : names) c.cv.architectures.push_back(parse_architecture(n));
    }
    if (v.contains("samplers")) {
      std::vector<std::string> names;
      read(v, "samplers", names);
      c.cv.samplers.clear();
      for (const auto& n : names) c.cv.samplers.push_back(parse_sampler(n));
    }
  }
  if (j.contains("final")) {
    check_keys(j.at("final"), "final", {"val_fraction"});
    read(j.at("final"), "val_fraction", c.final_model.val_fraction);
  }
  if (j.contains("visualize")) {
    check_keys(j.at("visualize"), "visualize", {"width"});
    read(j.at("visualize"), "width", c.visualize.width);
  }
  read(j, "threads", c.threads);
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string to_json_text(const RunConfig& c) {
  json archs = json::array();
  for (auto a : c.cv.architectures) archs.push_back(to_string(a));
  json samplers = json::array();
  for (auto s : c.cv.samplers) samplers.push_back(to_string(s));
  const json j = {
      {"paths",
       {{"data_dir", c.paths.data_dir.string()},
        {"labels", c.paths.labels.string()},
        {"cache_dir", c.paths.cache_dir.string()},
        {"model", c.paths.model.string()},
        {"output_dir", c.paths.output_dir.string()}}},
      {"preprocess",
       {{"mode", resample_mode_name(c.preprocess.mode)},
        {"unknown_byte", unknown_byte_name(c.preprocess.unknown)}}},
      {"model", to_json_model(c.model)},
      {"train", to_json_train(c.train)},
      {"cv",
       {{"folds", c.cv.folds},
        {"subsample", c.cv.subsample},
        {"architectures", archs},
        {"samplers", samplers}}},
      {"final", {{"val_fraction", c.final_model.val_fraction}}},
      {"visualize", {{"width", c.visualize.width}}},
      {"threads", c.threads}};
  return j.dump(2) + "\n";
}

void write_run_config(const RunConfig& config, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json_text(config);
}

}  // namespace bytefam::cli
