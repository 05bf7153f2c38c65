#include <algorithm>
#include <cmath>

#include "bytefam/errors.hpp"
#include "bytefam/random.hpp"
#include "bytefam/resample.hpp"
#include "doctest.h"
#include "synthetic.hpp"

using namespace bytefam;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(uniform_index(rng, 256));
  return v;
}

}  // namespace

TEST_CASE("two-point ramp to four points") {
  const std::vector<double> in{0.0, 255.0};
  CHECK(resample_linear(in, 4) == std::vector<double>{0.0, 85.0, 170.0, 255.0});
}

TEST_CASE("same length is the identity") {
  Rng rng(3);
  const auto in = random_values(rng, kSequenceLength);
  CHECK(resample_linear(in, kSequenceLength) == in);

  ByteSequence seq{"s", std::vector<std::uint8_t>(kSequenceLength)};
  for (auto& b : seq.bytes) b = static_cast<std::uint8_t>(rng());
  const auto out = resample(seq);
  REQUIRE(out.values.size() == kSequenceLength);
  for (std::size_t i = 0; i < kSequenceLength; ++i) REQUIRE(out.values[i] == seq.bytes[i]);
}

TEST_CASE("constant input stays constant") {
  ByteSequence seq{"a", std::vector<std::uint8_t>(5000, 0x41)};
  const auto out = resample(seq);
  CHECK(out.values.size() == kSequenceLength);
  CHECK(std::all_of(out.values.begin(), out.values.end(), [](float v) { return v == 65.0f; }));
  CHECK(out.sample_id == "a");
}

TEST_CASE("single byte broadcasts and degenerate targets") {
  const std::vector<double> one{7.0};
  CHECK(resample_linear(one, 5) == std::vector<double>(5, 7.0));
  const std::vector<double> three{1.0, 2.0, 3.0};
  CHECK(resample_linear(three, 1) == std::vector<double>{1.0});
  CHECK_THROWS_AS(resample_linear(std::span<const double>(), 4), EmptySampleError);
  CHECK_THROWS_AS(resample_linear(three, 0), ArgumentError);
}

TEST_CASE("bounded and monotone over random inputs") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + uniform_index(rng, 3000);
    const auto m = 1 + uniform_index(rng, 3000);
    auto in = random_values(rng, n);
    const auto [lo, hi] = std::minmax_element(in.begin(), in.end());
    for (double v : resample_linear(in, m)) {
      REQUIRE(v >= *lo);
      REQUIRE(v <= *hi);
    }
    std::sort(in.begin(), in.end());
    const auto up = resample_linear(in, m);
    REQUIRE(std::is_sorted(up.begin(), up.end()));
  }
}

TEST_CASE("downsampling an exact upsample recovers the input") {
  Rng rng(9);
  for (std::size_t k : {1u, 2u, 3u, 7u}) {
    const auto in = random_values(rng, 500);
    const auto up = resample_linear(in, k * (in.size() - 1) + 1);
    const auto back = resample_linear(up, in.size());
    for (std::size_t i = 0; i < in.size(); ++i) REQUIRE(std::abs(back[i] - in[i]) <= 1e-9);
  }
}

TEST_CASE("area mode averages boxes and is bounded") {
  const std::vector<double> in{0, 10, 20, 30};
  CHECK(resample_area(in, 2) == std::vector<double>{5.0, 25.0});
  const std::vector<double> thirds{0, 3, 6};
  const auto two = resample_area(thirds, 2);
  CHECK(two[0] == doctest::Approx(1.0));
  CHECK(two[1] == doctest::Approx(5.0));
  CHECK(resample_area(thirds, 5) == resample_linear(thirds, 5));

  Rng rng(13);
  const auto x = random_values(rng, 12345);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  for (double v : resample_area(x, 1000)) {
    REQUIRE(v >= *lo);
    REQUIRE(v <= *hi);
  }
  ByteSequence seq{"s", std::vector<std::uint8_t>(20000, 9)};
  const auto out = resample(seq, kSequenceLength, ResampleMode::Area);
  CHECK(std::all_of(out.values.begin(), out.values.end(), [](float v) { return v == 9.0f; }));
}

TEST_CASE("PGM export") {
  std::vector<float> values(kSequenceLength, 0.0f);
  auto square = parse_pgm(export_pgm(values, 100));
  CHECK(square.width == 100);
  CHECK(square.height == 100);
  CHECK(std::all_of(square.pixels.begin(), square.pixels.end(), [](auto p) { return p == 0; }));

  std::fill(values.begin(), values.end(), 200.4f);
  const auto bytes = export_pgm(values, 128);
  const std::string head(bytes.begin(), bytes.begin() + 15);
  CHECK(head == "P5\n128 79\n255\n\xC8");
  const auto wide = parse_pgm(bytes);
  CHECK(wide.width == 128);
  CHECK(wide.height == 79);
  REQUIRE(wide.pixels.size() == 128 * 79);
  CHECK(std::count(wide.pixels.begin(), wide.pixels.end(), 0) == 112);
  CHECK(std::count(wide.pixels.begin(), wide.pixels.end(), 200) == 10000);

  const std::vector<float> rounding{0.49f, 0.5f, 254.5f, 255.0f};
  CHECK(parse_pgm(export_pgm(rounding, 4)).pixels == std::vector<std::uint8_t>{0, 1, 255, 255});
  CHECK_THROWS_AS(export_pgm(values, 0), ArgumentError);
  CHECK_THROWS_AS(parse_pgm(std::vector<std::uint8_t>{'P', '6'}), FormatError);
}

TEST_CASE("cache records") {
  std::vector<float> values{0.0f, 1.5f, 255.0f};
  const auto rec = encode_cache_record(values);
  CHECK(rec.size() == 16 + 12);
  CHECK(std::string(rec.begin(), rec.begin() + 4) == "BC1D");
  CHECK(decode_cache_record(rec) == values);

  auto bad = rec;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_cache_record(bad), FormatError);
  auto short_rec = rec;
  short_rec.pop_back();
  CHECK_THROWS_AS(decode_cache_record(short_rec), FormatError);

  bytefam::testing::TempDir dir;
  CHECK_FALSE(read_cache(dir.path(), "nothing").has_value());
  write_cache(dir.path(), {"id1", values});
  const auto back = read_cache(dir.path(), "id1");
  REQUIRE(back.has_value());
  CHECK(back->values == values);
  CHECK(back->sample_id == "id1");
  CHECK(cache_path(dir.path(), "id1").filename() == "id1.bc1d");
}
