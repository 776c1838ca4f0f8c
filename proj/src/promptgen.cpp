#include "distill/promptgen.hpp"

#include <map>
#include <sstream>

#include "distill/errors.hpp"
#include "distill/sampling.hpp"
#include "distill/text.hpp"

namespace distill {
namespace {

constexpr std::string_view kOpenTag = "<example>";
constexpr std::string_view kCloseTag = "</example>";

constexpr std::string_view kConstraints =
    "You do not need to provide a response to the generated examples.\n"
    "Each example must include an instruction.\n"
    "Each generated instruction can be either an imperative sentence or a question.\n"
    "Each example must start with the label \"<example>\" and end with the label "
    "\"</example>\".\n";

void check_seeds(std::span<const std::string> seeds) {
  if (seeds.size() != kSeedsPerPrompt) {
    throw ValidationError("seed_count", "expected exactly 3 seeds, got " +
                                            std::to_string(seeds.size()));
  }
  for (const auto& s : seeds) {
    if (trim(s).empty()) throw ValidationError("seed_empty", "seed text is blank");
    if (contains(s, kCloseTag) || contains(s, kOpenTag)) {
      throw ValidationError("seed_tag", "seed contains an <example> tag: " + s);
    }
  }
}

std::string example_block(std::span<const std::string> seeds) {
  std::string out;
  for (const auto& s : seeds) {
    out += kOpenTag;
    out += s;
    out += kCloseTag;
    out += '\n';
  }
  out += '\n';
  return out;
}

}  // namespace

std::string_view to_string(SourceFamily family) {
  switch (family) {
    case SourceFamily::self_instruct: return "self-instruct";
    case SourceFamily::p3: return "p3";
    case SourceFamily::flan: return "flan";
  }
  return "?";
}

SourceFamily parse_family(std::string_view name) {
  if (name == "self-instruct" || name == "self_instruct") return SourceFamily::self_instruct;
  if (name == "p3") return SourceFamily::p3;
  if (name == "flan") return SourceFamily::flan;
  throw ValidationError("family", "unknown source family '" + std::string(name) + "'");
}

int batch_size_for(SourceFamily family) {
  return family == SourceFamily::self_instruct ? 20 : 10;
}

std::string fuse_instruction_input(std::string_view instruction,
                                   const std::optional<std::string>& input) {
  if (instruction.empty()) throw ValidationError("instruction", "instruction is empty");
  std::string out(instruction);
  if (input && !input->empty()) {
    out += ':';
    out += *input;
  }
  return out;
}

PromptSpec render_example_guided(const SeedSample& seeds, int batch) {
  check_seeds(seeds.texts);
  if (batch != 10 && batch != 20) {
    throw ValidationError("batch", "batch must be 10 or 20, got " + std::to_string(batch));
  }
  if (batch != batch_size_for(seeds.family)) {
    throw ValidationError("batch", "batch " + std::to_string(batch) +
                                       " does not match family " +
                                       std::string(to_string(seeds.family)));
  }
  PromptSpec spec;
  spec.rendered_text = example_block(seeds.texts) + "Generate " + std::to_string(batch) +
                       " diverse examples that are similar to the provided examples.\n" +
                       std::string(kConstraints);
  spec.seed_example_ids = seeds.ids;
  spec.requested_batch = batch;
  spec.source_family = seeds.family;
  return spec;
}

PromptSpec render_example_guided(std::span<const std::string> seeds, int batch) {
  SeedSample sample;
  sample.texts.assign(seeds.begin(), seeds.end());
  sample.family = batch == 20 ? SourceFamily::self_instruct : SourceFamily::p3;
  return render_example_guided(sample, batch);
}

PromptSpec render_topic_guided(const SeedSample& seeds,
                               std::span<const std::string> topics) {
  check_seeds(seeds.texts);
  if (seeds.family != SourceFamily::self_instruct) {
    throw ValidationError("family", "topic-guided prompts use self-instruct seeds");
  }
  if (topics.size() != kTopicsPerPrompt) {
    throw ValidationError("topic_count", "expected exactly 3 topics, got " +
                                             std::to_string(topics.size()));
  }
  std::string joined;
  for (const auto& t : topics) {
    if (trim(t).empty()) throw ValidationError("topic_empty", "topic is blank");
    if (contains(t, "\"")) throw ValidationError("topic_quote", "topic contains '\"': " + t);
    if (contains(t, "\n")) throw ValidationError("topic_newline", "topic contains a newline");
    if (!joined.empty()) joined += ", ";
    joined += t;
  }
  PromptSpec spec;
  spec.rendered_text = example_block(seeds.texts) +
                       "Generate 20 diverse examples that are similar to the provided "
                       "examples with the topics \"" +
                       joined + "\".\n" + std::string(kConstraints);
  spec.seed_example_ids = seeds.ids;
  spec.topics = std::vector<std::string>(topics.begin(), topics.end());
  spec.requested_batch = 20;
  spec.source_family = SourceFamily::self_instruct;
  return spec;
}

PromptSpec render_topic_guided(std::span<const std::string> seeds,
                               std::span<const std::string> topics) {
  SeedSample sample;
  sample.texts.assign(seeds.begin(), seeds.end());
  return render_topic_guided(sample, topics);
}

SeedSample sample_seeds(std::span<const SeedRecord> pool, SourceFamily family,
                        std::uint64_t seed) {
  if (pool.size() < kSeedsPerPrompt) {
    throw ValidationError("pool_size", "seed pool has fewer than 3 members");
  }
  Rng rng(seed);
  std::vector<std::size_t> candidates;
  SeedSample sample;
  sample.family = family;

  if (family == SourceFamily::self_instruct) {
    candidates.resize(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) candidates[i] = i;
  } else {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < pool.size(); ++i) groups[pool[i].group].push_back(i);
    std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> eligible;
    for (const auto& g : groups) {
      if (g.second.size() >= kSeedsPerPrompt) eligible.push_back(&g);
    }
    if (eligible.empty()) {
      throw ValidationError("pool_size", "no sub-dataset has at least 3 seeds");
    }
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    const auto* chosen = eligible[pick(rng)];
    sample.group = chosen->first;
    candidates = chosen->second;
  }

  for (std::size_t k : sample_indices(candidates.size(), kSeedsPerPrompt, rng)) {
    const SeedRecord& r = pool[candidates[k]];
    sample.texts.push_back(fuse_instruction_input(r.instruction, r.input));
    sample.ids.push_back(r.id);
  }
  return sample;
}

}  // namespace distill
