#pragma once

// Loading labeled malware corpora: hex-dump (.bytes) and raw binary samples,
// the Id,Class labels table, and corpus statistics.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bytefam {

inline constexpr std::size_t kNumFamilies = 9;

/// Family names indexed by class index 0..8 (label values 1..9 in the table).
inline constexpr std::array<std::string_view, kNumFamilies> kFamilyNames = {
    "Ramnit", "Lollipop",     "Kelihos_ver3",   "Vundo", "Simda",
    "Tracur", "Kelihos_ver1", "Obfuscator.ACY", "Gatak"};

std::string_view family_name(int class_index);

/// Raw content of one sample.
struct ByteSequence {
  std::string sample_id;
  std::vector<std::uint8_t> bytes;

  std::size_t original_length() const noexcept { return bytes.size(); }
};

struct LabeledSample {
  ByteSequence sequence;
  int label = 0;  // 0..8
};

/// What an unreadable `??` token in a hex dump decodes to.
enum class UnknownByte { Zero, Drop };

struct HexDumpOptions {
  UnknownByte unknown = UnknownByte::Zero;
};

/// Parses `ADDRESS B1 ... Bn` lines. Throws ParseError (with line number)
/// on malformed tokens and EmptySampleError if nothing decodes.
ByteSequence parse_hex_dump(std::istream& text, const HexDumpOptions& options = {});
ByteSequence parse_hex_dump(std::string_view text, const HexDumpOptions& options = {});

/// Inverse of parse_hex_dump: 16 bytes per line, 8-digit uppercase address.
std::string format_hex_dump(std::span<const std::uint8_t> bytes);

/// Exact file content. Throws IoError or EmptySampleError.
ByteSequence read_raw_binary(const std::filesystem::path& path);

/// `.bytes` files are parsed as hex dumps, anything else is read raw.
/// The sample id is the file stem.
ByteSequence read_sample(const std::filesystem::path& path,
                         const HexDumpOptions& options = {});

/// True for files that count as samples inside a corpus directory:
/// `.bytes`, `.bin`, or no extension. Disassembly (`.asm`) and everything
/// else is skipped.
bool is_sample_file(const std::filesystem::path& path);

/// Sample files under `dir` keyed by id (stem). If both `x.bytes` and a raw
/// `x` exist, the hex dump wins.
std::map<std::string, std::filesystem::path> list_sample_files(
    const std::filesystem::path& dir);

/// Labels table `Id,Class` with Class in 1..9; returns id -> class index 0..8.
/// Quoted fields are accepted. Throws SchemaError.
std::map<std::string, int> read_labels(const std::filesystem::path& path);
std::map<std::string, int> read_labels(std::istream& text);

/// A labeled sample that has been located but not read.
struct CorpusEntry {
  std::string sample_id;
  std::filesystem::path path;
  int label = 0;
};

/// Joins labels with sample files, sorted by sample_id. Throws
/// ReconciliationError listing ids present on one side only.
std::vector<CorpusEntry> scan_corpus(const std::filesystem::path& data_dir,
                                     const std::filesystem::path& labels);

/// scan_corpus + read_sample for every entry (parallel, order preserved).
std::vector<LabeledSample> load_corpus(const std::filesystem::path& data_dir,
                                       const std::filesystem::path& labels,
                                       const HexDumpOptions& options = {},
                                       unsigned threads = 0);

struct SampleSummary {
  std::optional<int> label;
  std::size_t original_length = 0;
};

struct CorpusStats {
  std::map<int, std::size_t> per_class_counts;
  /// Key is floor(original_length / 1024).
  std::map<std::size_t, std::size_t> size_histogram_kb;
  std::size_t total = 0;
};

CorpusStats corpus_stats(std::span<const LabeledSample> samples);
CorpusStats corpus_stats(std::span<const SampleSummary> samples);

}  // namespace bytefam
