#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "distill/text.hpp"

namespace distill {

using Json = nlohmann::ordered_json;

/// The seven dataset subsets. The union view is reported separately as "all".
enum class SubsetTag { gen_si, gen_topic_si, gen_p3, gen_flan, alpaca, p3, flan };

inline constexpr std::array<SubsetTag, 7> kAllSubsets = {
    SubsetTag::gen_si, SubsetTag::gen_topic_si, SubsetTag::gen_p3,
    SubsetTag::gen_flan, SubsetTag::alpaca, SubsetTag::p3, SubsetTag::flan};

inline constexpr std::string_view kUnionName = "all";

std::string_view to_string(SubsetTag tag);
/// Throws ValidationError for anything outside the seven tags.
SubsetTag parse_subset(std::string_view name);

struct GenerationMeta {
  std::string model;
  std::string timestamp;  // ISO-8601
  std::string prompt_hash;
  std::vector<std::string> topics;

  bool operator==(const GenerationMeta&) const = default;
};

struct InstructionRecord {
  std::string id;
  std::string instruction;
  std::optional<std::string> input;
  std::optional<std::string> response;
  SubsetTag subset = SubsetTag::gen_si;
  GenerationMeta meta;
  /// Top-level fields outside the schema, kept for lossless round-trip.
  Json extra = Json::object();

  bool operator==(const InstructionRecord&) const = default;
};

/// Throws ValidationError when the record breaks its invariants.
void validate(const InstructionRecord& record);

/// Instruction text with its input folded in (see fuse_instruction_input).
std::string full_instruction(const InstructionRecord& record);

Json to_json(const InstructionRecord& record);
/// `reject_unknown` turns unknown top-level fields into a ValidationError.
InstructionRecord record_from_json(const Json& j, bool reject_unknown = false);

// ---------------------------------------------------------------------------
// JSONL persistence

struct LoadOptions {
  /// Abort on the first malformed line instead of skipping it.
  bool strict = true;
  bool reject_unknown_fields = false;
};

struct SkippedLine {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<InstructionRecord> records;
  std::vector<SkippedLine> skipped;
};

LoadResult load_jsonl(const std::filesystem::path& path, LoadOptions options = {});
void save_jsonl(const std::vector<InstructionRecord>& records,
                const std::filesystem::path& path);

/// Reads the released dataset layout, one JSON object per line with
/// `instruction`, `response`, and `instruction_source` fields.
LoadResult load_released_jsonl(const std::filesystem::path& path);
SubsetTag subset_from_release_source(std::string_view source);

// ---------------------------------------------------------------------------
// Store

/// Append-only record store, optionally backed by a JSONL file. Appends are
/// serialized; snapshot reads take the same lock.
class CorpusStore {
 public:
  CorpusStore() = default;

  /// File-backed store: loads existing lines, then appends new records to the
  /// file (created if missing), flushing after each one.
  explicit CorpusStore(const std::filesystem::path& path, LoadOptions options = {});

  CorpusStore(const CorpusStore&) = delete;
  CorpusStore& operator=(const CorpusStore&) = delete;

  /// Validates and appends. Throws ValidationError or DuplicateIdError.
  void append(InstructionRecord record);

  std::size_t size() const;
  bool contains(std::string_view id) const;
  std::vector<InstructionRecord> snapshot() const;

 private:
  mutable std::mutex mu_;
  std::vector<InstructionRecord> records_;
  std::unordered_set<std::string> ids_;
  std::optional<std::filesystem::path> path_;
  std::ofstream sink_;
};

// ---------------------------------------------------------------------------
// Dedup

enum class DedupKey { instruction, instruction_response_pair };

/// Normalized comparison key: NFC, then whitespace trim. No case folding.
std::string dedup_key(const InstructionRecord& record, DedupKey key);

struct DedupResult {
  std::vector<InstructionRecord> records;
  std::size_t duplicates = 0;
};

DedupResult dedup(const std::vector<InstructionRecord>& records, DedupKey key);

// ---------------------------------------------------------------------------
// Statistics

struct SubsetStats {
  std::string subset;
  std::uint64_t sample_count = 0;
  std::uint64_t instruction_tokens = 0;
  double avg_instruction_len = 0.0;
  std::uint64_t response_tokens = 0;
  double avg_response_len = 0.0;
  /// Set when sample_count is 0; averages are then reported as 0.
  bool empty = true;
};

struct CorpusStats {
  std::vector<SubsetStats> subsets;  // kAllSubsets order
  SubsetStats all;
};

/// Instruction tokens count the fused instruction (input included); a missing
/// response contributes zero tokens.
CorpusStats compute_stats(const std::vector<InstructionRecord>& records,
                          const Tokenizer& tokenizer = default_tokenizer());

inline constexpr std::string_view kStatsCsvHeader =
    "subset,samples,ins_tokens,avg_ins_len,res_tokens,avg_res_len";

void write_stats_csv(const CorpusStats& stats, std::ostream& out);

// ---------------------------------------------------------------------------
// Sampling

/// Uniform sample without replacement, returned in store order. When n covers
/// the (filtered) population the whole population is returned.
std::vector<InstructionRecord> sample_records(
    const std::vector<InstructionRecord>& records, std::size_t n,
    std::uint64_t seed, std::optional<SubsetTag> subset = std::nullopt);

}  // namespace distill
