#include "bytefam/model_io.hpp"

#include <zlib.h>

#include <fstream>
#include <iomanip>
#include <iterator>

#include "bytefam/byte_order.hpp"
#include "bytefam/errors.hpp"

namespace bytefam {
namespace {

constexpr char kMagic[4] = {'B', 'C', 'N', 'N'};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError("weight file is truncated");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() { return detail::get_u32(take(4)); }
  std::uint64_t u64() { return detail::get_u64(take(8)); }
  double f64() { return detail::get_f64(take(8)); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelParams<float>& params) {
  const auto& c = params.config;
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  detail::put_u32(out, kWeightFileVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(c.architecture));
  detail::put_u64(out, c.input_len);
  detail::put_u32(out, static_cast<std::uint32_t>(c.conv_filters.size()));
  for (auto f : c.conv_filters) detail::put_u64(out, f);
  detail::put_u64(out, c.kernel_width);
  detail::put_u64(out, c.pool_width);
  detail::put_u64(out, c.dense_units);
  detail::put_u64(out, c.lstm_hidden);
  detail::put_u64(out, c.num_classes);
  detail::put_f64(out, c.dropout_dense);
  detail::put_f64(out, c.dropout_lstm);
  detail::put_f64(out, c.l2_lambda);
  detail::put_u64(out, c.seed);

  detail::put_u32(out, static_cast<std::uint32_t>(params.tensors.size()));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const auto& name = params.names[i];
    const auto& t = params.tensors[i];
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) detail::put_u64(out, d);
    detail::put_f32_array(out, t.data());
  }
  detail::put_u32(out, crc32_of(out));
  return out;
}

ModelParams<float> decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("weight file is truncated");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("not a weight file (bad magic)");
  }
  if (detail::get_u32(bytes.data() + 4) != kWeightFileVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(detail::get_u32(bytes.data() + 4)));
  }
  const auto body = bytes.first(bytes.size() - 4);
  if (crc32_of(body) != detail::get_u32(bytes.data() + bytes.size() - 4)) {
    throw FormatError("weight file checksum mismatch (corrupt or truncated)");
  }

  Reader r(body);
  r.take(8);
  ModelParams<float> params;
  auto& c = params.config;
  const auto arch = r.u32();
  if (arch > static_cast<std::uint32_t>(Architecture::CnnBiLstm)) throw FormatError("unknown architecture tag");
  c.architecture = static_cast<Architecture>(arch);
  c.input_len = r.u64();
  const auto convs = r.u32();
  if (convs > 64) throw FormatError("implausible conv layer count");
  c.conv_filters.clear();
  for (std::uint32_t i = 0; i < convs; ++i) c.conv_filters.push_back(r.u64());
  c.kernel_width = r.u64();
  c.pool_width = r.u64();
  c.dense_units = r.u64();
  c.lstm_hidden = r.u64();
  c.num_classes = r.u64();
  c.dropout_dense = r.f64();
  c.dropout_lstm = r.f64();
  c.l2_lambda = r.f64();
  c.seed = r.u64();

  std::vector<NamedTensorShape> layout;
  try {
    layout = parameter_layout(c);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("embedded config is invalid: ") + e.what());
  }
  const auto count = r.u32();
  if (count != layout.size()) throw FormatError("tensor count does not match the embedded config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.u32();
    const auto* name_ptr = r.take(name_len);
    std::string name(reinterpret_cast<const char*>(name_ptr), name_len);
    const auto rank = r.u32();
    nn::Shape shape;
    for (std::uint32_t a = 0; a < rank && a < 8; ++a) shape.push_back(r.u64());
    if (name != layout[i].name || shape != layout[i].shape) {
      throw FormatError("tensor '" + name + "' " + nn::shape_string(shape) +
                        " does not match expected '" + layout[i].name + "' " +
                        nn::shape_string(layout[i].shape));
    }
    const std::size_t n = nn::shape_size(shape);
    const auto* data = r.take(n * 4);
    std::vector<float> values(n);
    detail::get_f32_array(data, values);
    params.names.push_back(std::move(name));
    params.tensors.emplace_back(std::move(shape), std::move(values));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last tensor");
  return params;
}

void save_model(const ModelParams<float>& params, const std::filesystem::path& path) {
  const auto bytes = encode_model(params);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

ModelParams<float> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_model(bytes);
}

void write_submission(std::ostream& out, std::span<const std::string> ids,
                      const nn::Tensor<float>& probabilities) {
  nn::require_rank(probabilities, 2, "submission probabilities");
  if (probabilities.dim(0) != ids.size()) throw ArgumentError("one probability row per id is required");
  const std::size_t classes = probabilities.dim(1);
  out << "Id";
  for (std::size_t c = 1; c <= classes; ++c) out << ",Prediction" << c;
  out << '\n';
  const auto old_precision = out.precision();
  out << std::setprecision(9);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (std::size_t c = 0; c < classes; ++c) out << ',' << probabilities[i * classes + c];
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace bytefam
