#pragma once

// Fixed-length 1D rescaling of byte sequences, PGM visualization, and the
// on-disk cache of preprocessed sequences.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bytefam/ingest.hpp"

namespace bytefam {

inline constexpr std::size_t kSequenceLength = 10'000;

/// Model input: `values.size() == target length`, each value in [0, 255].
struct ResampledSequence {
  std::string sample_id;
  std::vector<float> values;
};

enum class ResampleMode {
  Linear,  ///< endpoint-aligned piecewise-linear interpolation (default)
  Area,    ///< box averaging when shrinking, linear when growing
};

/// Output j samples the input at position j*(n-1)/(m-1). A single-byte input
/// broadcasts. Throws EmptySampleError on empty input, ArgumentError if
/// target_len is 0.
std::vector<double> resample_linear(std::span<const double> input, std::size_t target_len);

/// Each output j averages the input over [j*n/m, (j+1)*n/m) with fractional
/// edge weights. Falls back to resample_linear when m >= n.
std::vector<double> resample_area(std::span<const double> input, std::size_t target_len);

ResampledSequence resample(const ByteSequence& seq, std::size_t target_len = kSequenceLength,
                           ResampleMode mode = ResampleMode::Linear);

/// Binary greyscale PGM (P5, maxval 255); rows = ceil(size / width), the
/// last row zero-padded. Throws ArgumentError when width < 1.
std::vector<std::uint8_t> export_pgm(std::span<const float> values, std::size_t width);

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Reads back what export_pgm writes. Throws FormatError.
PgmImage parse_pgm(std::span<const std::uint8_t> bytes);

/// Cache record: 16-byte header (magic "BC1D", u32 version, u32 length,
/// u32 reserved) followed by `length` little-endian float32 values.
inline constexpr std::uint32_t kCacheVersion = 1;

std::vector<std::uint8_t> encode_cache_record(std::span<const float> values);
std::vector<float> decode_cache_record(std::span<const std::uint8_t> bytes);

std::filesystem::path cache_path(const std::filesystem::path& cache_dir,
                                 const std::string& sample_id);
void write_cache(const std::filesystem::path& cache_dir, const ResampledSequence& seq);
/// std::nullopt when the record does not exist; FormatError when it is bad.
std::optional<ResampledSequence> read_cache(const std::filesystem::path& cache_dir,
                                            const std::string& sample_id);

}  // namespace bytefam
