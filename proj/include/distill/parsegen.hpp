#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace distill {

inline constexpr std::size_t kDefaultMaxExampleLength = 2048;

enum class RejectReason { empty, duplicate, unclosed, nested_tag, too_long, overflow };

std::string_view to_string(RejectReason reason);

struct RejectedSpan {
  RejectReason reason;
  std::string fragment;
};

struct ParsedBatch {
  std::vector<std::string> examples;
  std::size_t shortfall = 0;
  std::vector<RejectedSpan> rejected_spans;

  std::size_t count(RejectReason reason) const;
};

struct ParseOptions {
  /// Cap in Unicode code points, applied after trimming.
  std::size_t max_length = kDefaultMaxExampleLength;
};

/// Scans `raw` for `<example>...</example>` pairs, left to right and
/// non-greedy. An open tag followed by another open tag before any close tag
/// is unclosed; only that span is lost. Text outside pairs is ignored.
/// Examples past `expected` are rejected as overflow.
ParsedBatch extract_examples(std::string_view raw, std::size_t expected,
                             ParseOptions options = {});

/// Trimmed text, or ValidationError with code `too_long` / `nested_tag`.
std::string validate_example(std::string_view text,
                             std::size_t max_length = kDefaultMaxExampleLength);

}  // namespace distill
