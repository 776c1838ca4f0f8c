#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace distill {

enum class SourceFamily { self_instruct, p3, flan };

std::string_view to_string(SourceFamily family);
/// Accepts `self-instruct`/`self_instruct`, `p3`, `flan`.
SourceFamily parse_family(std::string_view name);

/// Instructions requested per prompt: 20 for self-instruct seeds, 10 for the
/// context-heavy P3/FLAN seeds.
int batch_size_for(SourceFamily family);

inline constexpr std::size_t kSeedsPerPrompt = 3;
inline constexpr std::size_t kTopicsPerPrompt = 3;

/// A fully rendered instruction-generation prompt with its provenance.
struct PromptSpec {
  std::string rendered_text;
  std::vector<std::string> seed_example_ids;
  std::optional<std::vector<std::string>> topics;
  int requested_batch = 20;
  SourceFamily source_family = SourceFamily::self_instruct;
};

/// `instruction` unchanged when input is absent or empty, else
/// `instruction:input` with no added whitespace.
std::string fuse_instruction_input(std::string_view instruction,
                                   const std::optional<std::string>& input);

/// Three seed texts drawn from one pool, ready for rendering.
struct SeedSample {
  std::vector<std::string> texts;
  std::vector<std::string> ids;
  SourceFamily family = SourceFamily::self_instruct;
  /// Sub-dataset the seeds came from (P3/FLAN task); empty for self-instruct.
  std::string group;
};

/// Renders the example-guided prompt. `batch` must match the family's batch
/// size (20 self-instruct, 10 otherwise).
PromptSpec render_example_guided(const SeedSample& seeds, int batch);

/// Convenience for bare seed texts; family is inferred from `batch`
/// (20 -> self-instruct, 10 -> p3).
PromptSpec render_example_guided(std::span<const std::string> seeds, int batch);

/// Renders the topic-guided prompt (self-instruct seeds, batch 20).
PromptSpec render_topic_guided(const SeedSample& seeds,
                               std::span<const std::string> topics);
PromptSpec render_topic_guided(std::span<const std::string> seeds,
                               std::span<const std::string> topics);

/// One candidate seed task.
struct SeedRecord {
  std::string id;
  std::string instruction;
  std::optional<std::string> input;
  /// Sub-dataset name; P3/FLAN seeds are only combined within one group.
  std::string group;
};

/// Draws three distinct seeds uniformly without replacement. For P3/FLAN one
/// group with at least three members is chosen uniformly first. Seeds with an
/// input are fused with fuse_instruction_input.
SeedSample sample_seeds(std::span<const SeedRecord> pool, SourceFamily family,
                        std::uint64_t seed);

}  // namespace distill
