#include "bytefam/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "bytefam/errors.hpp"
#include "bytefam/parallel.hpp"

namespace bytefam {
namespace fs = std::filesystem;

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string trim(std::string_view s) {
  while (!s.empty() && (is_space(s.front()) || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (is_space(s.back()) || s.back() == '\n')) s.remove_suffix(1);
  return std::string(s);
}

std::string unquote(std::string_view s) {
  std::string t = trim(s);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
  return t;
}

void parse_line(std::string_view line, std::size_t line_no, const HexDumpOptions& options,
                std::vector<std::uint8_t>& out) {
  std::size_t pos = 0;
  bool first = true;
  while (true) {
    while (pos < line.size() && is_space(line[pos])) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && !is_space(line[end])) ++end;
    const std::string_view token = line.substr(pos, end - pos);
    pos = end;

    if (first) {
      first = false;
      if (token.size() < 8) {
        throw ParseError(line_no, "address token '" + std::string(token) +
                                      "' is shorter than 8 hex digits");
      }
      for (char c : token) {
        if (hex_value(c) < 0) {
          throw ParseError(line_no, "non-hex character in address '" + std::string(token) + "'");
        }
      }
      continue;
    }

    if (token.size() != 2) {
      throw ParseError(line_no, "byte token '" + std::string(token) + "' is not 2 characters wide");
    }
    if (token == "??") {
      if (options.unknown == UnknownByte::Zero) out.push_back(0);
      continue;
    }
    const int hi = hex_value(token[0]);
    const int lo = hex_value(token[1]);
    if (hi < 0 || lo < 0) {
      throw ParseError(line_no, "non-hex byte token '" + std::string(token) + "'");
    }
    out.push_back(static_cast<std::uint8_t>(hi * 16 + lo));
  }
}

}  // namespace

std::string_view family_name(int class_index) {
  if (class_index < 0 || class_index >= static_cast<int>(kNumFamilies)) {
    throw ArgumentError("class index " + std::to_string(class_index) + " out of range 0..8");
  }
  return kFamilyNames[static_cast<std::size_t>(class_index)];
}

ByteSequence parse_hex_dump(std::string_view text, const HexDumpOptions& options) {
  ByteSequence seq;
  seq.bytes.reserve(text.size() / 3);
  std::size_t line_no = 0;
  std::size_t begin = 0;
  while (begin < text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    parse_line(text.substr(begin, end - begin), line_no, options, seq.bytes);
    begin = end + 1;
  }
  if (seq.bytes.empty()) throw EmptySampleError("hex dump decoded to zero bytes");
  return seq;
}

ByteSequence parse_hex_dump(std::istream& text, const HexDumpOptions& options) {
  const std::string content{std::istreambuf_iterator<char>(text), std::istreambuf_iterator<char>()};
  return parse_hex_dump(std::string_view(content), options);
}

std::string format_hex_dump(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(bytes.size() * 3 + bytes.size() / 16 * 10 + 16);
  char address[16];
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    std::snprintf(address, sizeof(address), "%08zX", off);
    out += address;
    const std::size_t end = std::min(bytes.size(), off + 16);
    for (std::size_t i = off; i < end; ++i) {
      out += ' ';
      out += kDigits[bytes[i] >> 4];
      out += kDigits[bytes[i] & 0xF];
    }
    out += '\n';
  }
  return out;
}

ByteSequence read_raw_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  ByteSequence seq;
  seq.sample_id = path.stem().string();
  seq.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  if (seq.bytes.empty()) throw EmptySampleError(path.string() + " is empty");
  return seq;
}

ByteSequence read_sample(const fs::path& path, const HexDumpOptions& options) {
  if (path.extension() != ".bytes") return read_raw_binary(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  ByteSequence seq;
  try {
    seq = parse_hex_dump(in, options);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  } catch (const EmptySampleError&) {
    throw EmptySampleError(path.string() + " decoded to zero bytes");
  }
  seq.sample_id = path.stem().string();
  return seq;
}

bool is_sample_file(const fs::path& path) {
  const auto name = path.filename().string();
  if (name.empty() || name.front() == '.') return false;
  const auto ext = path.extension();
  return ext == ".bytes" || ext == ".bin" || ext.empty();
}

std::map<std::string, fs::path> list_sample_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError(dir.string() + " is not a directory");
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_sample_file(entry.path())) continue;
    const auto id = entry.path().stem().string();
    auto [it, inserted] = files.emplace(id, entry.path());
    if (!inserted && entry.path().extension() == ".bytes") it->second = entry.path();
  }
  return files;
}

std::map<std::string, int> read_labels(std::istream& text) {
  std::map<std::string, int> labels;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(text, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw SchemaError("labels line " + std::to_string(line_no) + ": expected 'Id,Class'");
    }
    const std::string id = unquote(std::string_view(line).substr(0, comma));
    const std::string cls = unquote(std::string_view(line).substr(comma + 1));
    if (!header_seen) {
      header_seen = true;
      if (id == "Id" && cls == "Class") continue;
      throw SchemaError("labels table must start with header 'Id,Class'");
    }
    int value = 0;
    std::size_t used = 0;
    try {
      value = std::stoi(cls, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cls.size() || cls.empty() || value < 1 || value > static_cast<int>(kNumFamilies)) {
      throw SchemaError("labels line " + std::to_string(line_no) + ": class '" + cls +
                        "' for id '" + id + "' is not in 1..9");
    }
    if (id.empty()) throw SchemaError("labels line " + std::to_string(line_no) + ": empty id");
    if (!labels.emplace(id, value - 1).second) {
      throw SchemaError("labels line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
    }
  }
  return labels;
}

std::map<std::string, int> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels table " + path.string());
  return read_labels(in);
}

std::vector<CorpusEntry> scan_corpus(const fs::path& data_dir, const fs::path& labels_path) {
  const auto labels = read_labels(labels_path);
  const auto files = list_sample_files(data_dir);

  std::vector<std::string> missing_file;
  std::vector<std::string> missing_label;
  for (const auto& [id, cls] : labels) {
    if (!files.contains(id)) missing_file.push_back(id);
  }
  for (const auto& [id, path] : files) {
    if (!labels.contains(id)) missing_label.push_back(id);
  }
  if (!missing_file.empty() || !missing_label.empty()) {
    std::ostringstream msg;
    msg << "labels and sample files disagree";
    auto list = [&msg](const char* what, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg << "; " << what << " (" << ids.size() << "):";
      for (std::size_t i = 0; i < ids.size() && i < 20; ++i) msg << ' ' << ids[i];
      if (ids.size() > 20) msg << " ...";
    };
    list("labeled ids without a file", missing_file);
    list("files without a label", missing_label);
    throw ReconciliationError(msg.str());
  }

  std::vector<CorpusEntry> entries;
  entries.reserve(labels.size());
  for (const auto& [id, cls] : labels) entries.push_back({id, files.at(id), cls});
  return entries;
}

std::vector<LabeledSample> load_corpus(const fs::path& data_dir, const fs::path& labels,
                                       const HexDumpOptions& options, unsigned threads) {
  const auto entries = scan_corpus(data_dir, labels);
  std::vector<LabeledSample> samples(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    samples[i].sequence = read_sample(entries[i].path, options);
    samples[i].sequence.sample_id = entries[i].sample_id;
    samples[i].label = entries[i].label;
  });
  return samples;
}

CorpusStats corpus_stats(std::span<const SampleSummary> samples) {
  CorpusStats stats;
  for (const auto& s : samples) {
    if (s.label) ++stats.per_class_counts[*s.label];
    ++stats.size_histogram_kb[s.original_length / 1024];
    ++stats.total;
  }
  return stats;
}

CorpusStats corpus_stats(std::span<const LabeledSample> samples) {
  std::vector<SampleSummary> summaries;
  summaries.reserve(samples.size());
  for (const auto& s : samples) summaries.push_back({s.label, s.sequence.original_length()});
  return corpus_stats(std::span<const SampleSummary>(summaries));
}

}  // namespace bytefam
