#include "bytefam/resample.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "bytefam/byte_order.hpp"
#include "bytefam/errors.hpp"

namespace bytefam {
namespace fs = std::filesystem;

namespace {

void check_resample_args(std::size_t n, std::size_t target_len) {
  if (n == 0) throw EmptySampleError("cannot resample an empty sequence");
  if (target_len == 0) throw ArgumentError("target length must be positive");
}

constexpr char kCacheMagic[4] = {'B', 'C', '1', 'D'};
constexpr std::size_t kCacheHeaderSize = 16;

}  // namespace

std::vector<double> resample_linear(std::span<const double> input, std::size_t target_len) {
  const std::size_t n = input.size();
  check_resample_args(n, target_len);
  std::vector<double> out(target_len);
  if (n == 1 || target_len == 1) {
    std::fill(out.begin(), out.end(), input[0]);
    return out;
  }
  const double span_in = static_cast<double>(n - 1);
  const double span_out = static_cast<double>(target_len - 1);
  for (std::size_t j = 0; j < target_len; ++j) {
    const double pos = static_cast<double>(j) * span_in / span_out;
    auto i0 = static_cast<std::size_t>(pos);
    if (i0 >= n - 1) {
      out[j] = input[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    const double a = input[i0];
    const double b = input[i0 + 1];
    const double v = a + (b - a) * frac;
    out[j] = std::clamp(v, std::min(a, b), std::max(a, b));
  }
  return out;
}

std::vector<double> resample_area(std::span<const double> input, std::size_t target_len) {
  const std::size_t n = input.size();
  check_resample_args(n, target_len);
  if (target_len >= n) return resample_linear(input, target_len);

  std::vector<double> out(target_len);
  const double scale = static_cast<double>(n) / static_cast<double>(target_len);
  for (std::size_t j = 0; j < target_len; ++j) {
    const double lo = static_cast<double>(j) * scale;
    const double hi = std::min(static_cast<double>(n), static_cast<double>(j + 1) * scale);
    auto first = static_cast<std::size_t>(lo);
    double sum = 0.0;
    double weight = 0.0;
    for (std::size_t i = first; i < n && static_cast<double>(i) < hi; ++i) {
      const double cell_lo = std::max(lo, static_cast<double>(i));
      const double cell_hi = std::min(hi, static_cast<double>(i + 1));
      const double w = cell_hi - cell_lo;
      if (w <= 0.0) continue;
      sum += w * input[i];
      weight += w;
    }
    out[j] = weight > 0.0 ? sum / weight : input[std::min(first, n - 1)];
  }
  return out;
}

ResampledSequence resample(const ByteSequence& seq, std::size_t target_len, ResampleMode mode) {
  std::vector<double> in(seq.bytes.begin(), seq.bytes.end());
  if (in.empty()) throw EmptySampleError("sample '" + seq.sample_id + "' is empty");
  const auto out = mode == ResampleMode::Linear ? resample_linear(in, target_len)
                                                : resample_area(in, target_len);
  ResampledSequence result;
  result.sample_id = seq.sample_id;
  result.values.assign(out.begin(), out.end());
  return result;
}

std::vector<std::uint8_t> export_pgm(std::span<const float> values, std::size_t width) {
  if (width < 1) throw ArgumentError("image width must be at least 1");
  const std::size_t height = (values.size() + width - 1) / width;
  const std::string header =
      "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + width * height);
  for (const float v : values) {
    const long px = std::lround(std::clamp(static_cast<double>(v), 0.0, 255.0));
    out.push_back(static_cast<std::uint8_t>(px));
  }
  out.resize(header.size() + width * height, 0);
  return out;
}

PgmImage parse_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok += static_cast<char>(bytes[pos++]);
    return tok;
  };
  if (next_token() != "P5") throw FormatError("not a binary PGM (P5) image");
  PgmImage img;
  try {
    img.width = std::stoul(next_token());
    img.height = std::stoul(next_token());
    if (std::stoul(next_token()) != 255) throw FormatError("PGM maxval must be 255");
  } catch (const std::logic_error&) {
    throw FormatError("malformed PGM header");
  }
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos || bytes.size() - pos != img.width * img.height) {
    throw FormatError("PGM raster size does not match header");
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

std::vector<std::uint8_t> encode_cache_record(std::span<const float> values) {
  std::vector<std::uint8_t> out(std::begin(kCacheMagic), std::end(kCacheMagic));
  out.reserve(kCacheHeaderSize + values.size() * 4);
  detail::put_u32(out, kCacheVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(values.size()));
  detail::put_u32(out, 0);
  detail::put_f32_array(out, values);
  return out;
}

std::vector<float> decode_cache_record(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCacheHeaderSize) throw FormatError("cache record shorter than its header");
  if (!std::equal(std::begin(kCacheMagic), std::end(kCacheMagic), bytes.begin())) {
    throw FormatError("cache record has bad magic");
  }
  if (detail::get_u32(bytes.data() + 4) != kCacheVersion) {
    throw FormatError("unsupported cache record version");
  }
  const std::size_t length = detail::get_u32(bytes.data() + 8);
  if (bytes.size() != kCacheHeaderSize + length * 4) {
    throw FormatError("cache record length does not match its header");
  }
  std::vector<float> values(length);
  detail::get_f32_array(bytes.data() + kCacheHeaderSize, values);
  return values;
}

fs::path cache_path(const fs::path& cache_dir, const std::string& sample_id) {
  return cache_dir / (sample_id + ".bc1d");
}

void write_cache(const fs::path& cache_dir, const ResampledSequence& seq) {
  fs::create_directories(cache_dir);
  const auto bytes = encode_cache_record(seq.values);
  const auto final_path = cache_path(cache_dir, seq.sample_id);
  auto tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, final_path);
}

std::optional<ResampledSequence> read_cache(const fs::path& cache_dir, const std::string& sample_id) {
  const auto path = cache_path(cache_dir, sample_id);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  ResampledSequence seq;
  seq.sample_id = sample_id;
  try {
    seq.values = decode_cache_record(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return seq;
}

}  // namespace bytefam
