#pragma once

// The `bytefam` command-line tool as a library, so it can be driven from tests.

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "bytefam/training.hpp"
#include "run_config.hpp"

namespace bytefam::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the tool. `args[0]` is the program name. Human-readable progress and
/// reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Loads every labeled sample of `config.paths`, reusing and filling the
/// preprocessed cache when `paths.cache_dir` is set. Rows follow sample-id order.
Dataset load_dataset(const RunConfig& config, std::ostream& log);

}  // namespace bytefam::cli
