#include "distill/corpus.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "distill/errors.hpp"
#include "distill/promptgen.hpp"
#include "distill/sampling.hpp"

namespace distill {
namespace {

constexpr std::array<std::string_view, 6> kKnownFields = {
    "id", "instruction", "input", "response", "subset", "meta"};

std::optional<std::string> optional_string(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ValidationError("type", std::string("field '") + key + "' must be a string or null");
  }
  return it->get<std::string>();
}

std::string required_string(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw ValidationError("type", std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::string format_avg(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

void finish(SubsetStats& s) {
  s.empty = s.sample_count == 0;
  if (s.empty) {
    s.avg_instruction_len = 0.0;
    s.avg_response_len = 0.0;
    return;
  }
  const auto n = static_cast<double>(s.sample_count);
  s.avg_instruction_len = static_cast<double>(s.instruction_tokens) / n;
  s.avg_response_len = static_cast<double>(s.response_tokens) / n;
}

}  // namespace

std::string_view to_string(SubsetTag tag) {
  switch (tag) {
    case SubsetTag::gen_si: return "gen_si";
    case SubsetTag::gen_topic_si: return "gen_topic_si";
    case SubsetTag::gen_p3: return "gen_p3";
    case SubsetTag::gen_flan: return "gen_flan";
    case SubsetTag::alpaca: return "alpaca";
    case SubsetTag::p3: return "p3";
    case SubsetTag::flan: return "flan";
  }
  return "?";
}

SubsetTag parse_subset(std::string_view name) {
  for (SubsetTag tag : kAllSubsets) {
    if (to_string(tag) == name) return tag;
  }
  throw ValidationError("subset", "unknown subset tag '" + std::string(name) + "'");
}

void validate(const InstructionRecord& record) {
  if (record.id.empty()) throw ValidationError("id", "record id is empty");
  if (trim(record.instruction).empty()) {
    throw ValidationError("instruction", "record '" + record.id + "' has an empty instruction");
  }
}

std::string full_instruction(const InstructionRecord& record) {
  return fuse_instruction_input(record.instruction, record.input);
}

Json to_json(const InstructionRecord& record) {
  Json j;
  j["id"] = record.id;
  j["instruction"] = record.instruction;
  j["input"] = record.input ? Json(*record.input) : Json(nullptr);
  j["response"] = record.response ? Json(*record.response) : Json(nullptr);
  j["subset"] = to_string(record.subset);
  j["meta"] = {{"model", record.meta.model},
               {"timestamp", record.meta.timestamp},
               {"prompt_hash", record.meta.prompt_hash},
               {"topics", record.meta.topics}};
  for (const auto& [key, value] : record.extra.items()) j[key] = value;
  return j;
}

InstructionRecord record_from_json(const Json& j, bool reject_unknown) {
  if (!j.is_object()) throw ValidationError("type", "record must be a JSON object");
  InstructionRecord r;
  r.id = required_string(j, "id");
  r.instruction = required_string(j, "instruction");
  r.input = optional_string(j, "input");
  r.response = optional_string(j, "response");
  r.subset = parse_subset(required_string(j, "subset"));
  if (const auto meta = j.find("meta"); meta != j.end() && !meta->is_null()) {
    if (!meta->is_object()) throw ValidationError("type", "field 'meta' must be an object");
    r.meta.model = optional_string(*meta, "model").value_or("");
    r.meta.timestamp = optional_string(*meta, "timestamp").value_or("");
    r.meta.prompt_hash = optional_string(*meta, "prompt_hash").value_or("");
    if (const auto topics = meta->find("topics"); topics != meta->end() && !topics->is_null()) {
      if (!topics->is_array()) throw ValidationError("type", "meta.topics must be an array");
      for (const auto& t : *topics) {
        if (!t.is_string()) throw ValidationError("type", "meta.topics entries must be strings");
        r.meta.topics.push_back(t.get<std::string>());
      }
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKnownFields.begin(), kKnownFields.end(), key) != kKnownFields.end()) continue;
    if (reject_unknown) throw ValidationError("unknown_field", "unknown field '" + key + "'");
    r.extra[key] = value;
  }
  validate(r);
  return r;
}

namespace {

template <typename Convert>
LoadResult load_lines(const std::filesystem::path& path, bool strict, Convert convert) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  LoadResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      InstructionRecord r = convert(Json::parse(line), lineno);
      if (!seen.insert(r.id).second) {
        throw DuplicateIdError("duplicate id '" + r.id + "'");
      }
      result.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      if (strict) throw ParseError(lineno, e.what());
      result.skipped.push_back({lineno, e.what()});
    }
  }
  return result;
}

}  // namespace

LoadResult load_jsonl(const std::filesystem::path& path, LoadOptions options) {
  return load_lines(path, options.strict, [&](const Json& j, std::size_t) {
    return record_from_json(j, options.reject_unknown_fields);
  });
}

void save_jsonl(const std::vector<InstructionRecord>& records,
                const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SubsetTag subset_from_release_source(std::string_view source) {
  static const std::unordered_map<std::string_view, SubsetTag> kMap = {
      {"self_instruct_without_topic", SubsetTag::gen_si},
      {"self_instruct_with_topic", SubsetTag::gen_topic_si},
      {"generated_p3", SubsetTag::gen_p3},
      {"generated_flan", SubsetTag::gen_flan},
      {"alpaca", SubsetTag::alpaca},
      {"original_p3", SubsetTag::p3},
      {"original_flan", SubsetTag::flan},
  };
  const auto it = kMap.find(source);
  if (it == kMap.end()) {
    throw ValidationError("subset", "unknown instruction_source '" + std::string(source) + "'");
  }
  return it->second;
}

LoadResult load_released_jsonl(const std::filesystem::path& path) {
  return load_lines(path, false, [](const Json& j, std::size_t lineno) {
    InstructionRecord r;
    r.id = "released-" + std::to_string(lineno);
    r.instruction = required_string(j, "instruction");
    r.response = optional_string(j, "response");
    r.subset = subset_from_release_source(required_string(j, "instruction_source"));
    validate(r);
    return r;
  });
}

// ---------------------------------------------------------------------------

CorpusStore::CorpusStore(const std::filesystem::path& path, LoadOptions options)
    : path_(path) {
  if (std::filesystem::exists(path)) {
    for (auto& r : load_jsonl(path, options).records) {
      ids_.insert(r.id);
      records_.push_back(std::move(r));
    }
  }
  sink_.open(path, std::ios::app);
  if (!sink_) throw IoError("cannot open " + path.string() + " for appending");
}

void CorpusStore::append(InstructionRecord record) {
  validate(record);
  std::lock_guard lock(mu_);
  if (ids_.contains(record.id)) {
    throw DuplicateIdError("duplicate id '" + record.id + "'");
  }
  if (path_) {
    sink_ << to_json(record).dump() << '\n';
    sink_.flush();
    if (!sink_) throw IoError("append failed for " + path_->string());
  }
  ids_.insert(record.id);
  records_.push_back(std::move(record));
}

std::size_t CorpusStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

bool CorpusStore::contains(std::string_view id) const {
  std::lock_guard lock(mu_);
  return ids_.contains(std::string(id));
}

std::vector<InstructionRecord> CorpusStore::snapshot() const {
  std::lock_guard lock(mu_);
  return records_;
}

// ---------------------------------------------------------------------------

std::string dedup_key(const InstructionRecord& record, DedupKey key) {
  std::string k(trim(nfc_normalize(full_instruction(record))));
  if (key == DedupKey::instruction_response_pair) {
    // \x1f cannot occur in a trimmed key boundary, and \x00 marks "no response".
    k += '\x1f';
    if (record.response) {
      k += trim(nfc_normalize(*record.response));
    } else {
      k += '\0';
    }
  }
  return k;
}

DedupResult dedup(const std::vector<InstructionRecord>& records, DedupKey key) {
  DedupResult result;
  std::unordered_set<std::string> seen;
  seen.reserve(records.size());
  for (const auto& r : records) {
    if (seen.insert(dedup_key(r, key)).second) {
      result.records.push_back(r);
    } else {
      ++result.duplicates;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

CorpusStats compute_stats(const std::vector<InstructionRecord>& records,
                          const Tokenizer& tokenizer) {
  CorpusStats stats;
  stats.subsets.resize(kAllSubsets.size());
  for (std::size_t i = 0; i < kAllSubsets.size(); ++i) {
    stats.subsets[i].subset = std::string(to_string(kAllSubsets[i]));
  }
  stats.all.subset = std::string(kUnionName);
  for (const auto& r : records) {
    auto& s = stats.subsets[static_cast<std::size_t>(r.subset)];
    const auto ins = tokenizer(full_instruction(r)).size();
    const auto res = r.response ? tokenizer(*r.response).size() : 0;
    s.sample_count += 1;
    s.instruction_tokens += ins;
    s.response_tokens += res;
  }
  for (auto& s : stats.subsets) {
    finish(s);
    stats.all.sample_count += s.sample_count;
    stats.all.instruction_tokens += s.instruction_tokens;
    stats.all.response_tokens += s.response_tokens;
  }
  finish(stats.all);
  return stats;
}

void write_stats_csv(const CorpusStats& stats, std::ostream& out) {
  out << kStatsCsvHeader << '\n';
  auto row = [&](const SubsetStats& s) {
    out << s.subset << ',' << s.sample_count << ',' << s.instruction_tokens << ','
        << format_avg(s.avg_instruction_len) << ',' << s.response_tokens << ','
        << format_avg(s.avg_response_len) << '\n';
  };
  for (const auto& s : stats.subsets) row(s);
  row(stats.all);
}

// ---------------------------------------------------------------------------

std::vector<InstructionRecord> sample_records(
    const std::vector<InstructionRecord>& records, std::size_t n,
    std::uint64_t seed, std::optional<SubsetTag> subset) {
  std::vector<std::size_t> population;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!subset || records[i].subset == *subset) population.push_back(i);
  }
  auto picked = sample_indices(population.size(), n, seed);
  std::sort(picked.begin(), picked.end());
  std::vector<InstructionRecord> out;
  out.reserve(picked.size());
  for (std::size_t p : picked) out.push_back(records[population[p]]);
  return out;
}

}  // namespace distill
