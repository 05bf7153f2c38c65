#pragma once

// Weight files and Kaggle-style submission files.
//
// Weight file layout (all integers and floats little-endian):
//   "BCNN" | u32 version | config block | u32 tensor count |
//   per tensor: u32 name length, name bytes, u32 rank, u64 extents..., f32 values |
//   u32 CRC-32 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bytefam/models.hpp"
#include "bytefam/nn/tensor.hpp"

namespace bytefam {

inline constexpr std::uint32_t kWeightFileVersion = 1;

std::vector<std::uint8_t> encode_model(const ModelParams<float>& params);
/// Throws FormatError on bad magic/version/checksum, truncation, or tensors
/// that do not match the layout implied by the embedded config.
ModelParams<float> decode_model(std::span<const std::uint8_t> bytes);

void save_model(const ModelParams<float>& params, const std::filesystem::path& path);
ModelParams<float> load_model(const std::filesystem::path& path);

/// Header `Id,Prediction1..PredictionK`, one probability row per id.
void write_submission(std::ostream& out, std::span<const std::string> ids,
                      const nn::Tensor<float>& probabilities);

}  // namespace bytefam
