#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace bytefam::detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
  return static_cast<std::uint64_t>(get_u32(p)) |
         static_cast<std::uint64_t>(get_u32(p + 4)) << 32;
}

inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }
inline double get_f64(const std::uint8_t* p) { return std::bit_cast<double>(get_u64(p)); }

/// Appends float32 values little-endian.
inline void put_f32_array(std::vector<std::uint8_t>& out, std::span<const float> values) {
  const auto offset = out.size();
  out.resize(offset + values.size() * 4);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + offset, values.data(), values.size() * 4);
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto v = std::bit_cast<std::uint32_t>(values[i]);
      for (int b = 0; b < 4; ++b) out[offset + 4 * i + b] = static_cast<std::uint8_t>(v >> (8 * b));
    }
  }
}

inline void get_f32_array(const std::uint8_t* p, std::span<float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(values.data(), p, values.size() * 4);
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f32(p + 4 * i);
  }
}

}  // namespace bytefam::detail
