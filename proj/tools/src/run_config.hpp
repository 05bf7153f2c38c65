#pragma once

// Run configuration shared by every command: loaded from a JSON file,
// overridden by flags, and written back next to the outputs.

#include <filesystem>
#include <string>
#include <vector>

#include "bytefam/ingest.hpp"
#include "bytefam/models.hpp"
#include "bytefam/resample.hpp"
#include "bytefam/sampling.hpp"
#include "bytefam/training.hpp"

namespace bytefam::cli {

struct PathsConfig {
  std::filesystem::path data_dir;
  std::filesystem::path labels;
  std::filesystem::path cache_dir;
  std::filesystem::path model;
  std::filesystem::path output_dir;
};

struct PreprocessConfig {
  ResampleMode mode = ResampleMode::Linear;
  UnknownByte unknown = UnknownByte::Zero;
};

struct CvConfig {
  std::size_t folds = 5;
  double subsample = 1.0;  ///< stratified fraction of the corpus, (0, 1]
  std::vector<Architecture> architectures{Architecture::CnnBiLstm};
  std::vector<SamplerMode> samplers{SamplerMode::Rebalance};
};

struct FinalConfig {
  double val_fraction = 0.1;
};

struct VisualizeConfig {
  std::size_t width = 100;
};

struct RunConfig {
  PathsConfig paths;
  PreprocessConfig preprocess;
  ModelConfig model;
  TrainConfig train;
  CvConfig cv;
  FinalConfig final_model;
  VisualizeConfig visualize;
  unsigned threads = 0;  ///< 0 = all hardware threads

  /// Throws ConfigError describing the first invalid value.
  void validate() const;
};

/// Parses JSON text. Keys missing from the text keep their defaults; unknown
/// keys and badly typed values throw ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Pretty-printed JSON with every field, so a run can be replayed from it.
std::string to_json_text(const RunConfig& config);
void write_run_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace bytefam::cli
