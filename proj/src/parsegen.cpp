#include "distill/parsegen.hpp"

#include <algorithm>
#include <unordered_set>

#include "distill/errors.hpp"
#include "distill/text.hpp"

namespace distill {
namespace {

constexpr std::string_view kOpen = "<example>";
constexpr std::string_view kClose = "</example>";

}  // namespace

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::empty: return "empty";
    case RejectReason::duplicate: return "duplicate";
    case RejectReason::unclosed: return "unclosed";
    case RejectReason::nested_tag: return "nested_tag";
    case RejectReason::too_long: return "too_long";
    case RejectReason::overflow: return "overflow";
  }
  return "?";
}

std::size_t ParsedBatch::count(RejectReason reason) const {
  return static_cast<std::size_t>(std::count_if(
      rejected_spans.begin(), rejected_spans.end(),
      [reason](const RejectedSpan& s) { return s.reason == reason; }));
}

std::string validate_example(std::string_view text, std::size_t max_length) {
  const std::string_view t = trim(text);
  if (contains(t, kOpen) || contains(t, kClose)) {
    throw ValidationError("nested_tag", "example contains a nested <example> tag");
  }
  if (utf8_length(t) > max_length) {
    throw ValidationError("too_long", "example exceeds " + std::to_string(max_length) +
                                          " characters");
  }
  return std::string(t);
}

ParsedBatch extract_examples(std::string_view raw, std::size_t expected,
                             ParseOptions options) {
  if (expected < 1) throw ValidationError("expected", "expected must be at least 1");
  ParsedBatch batch;
  std::unordered_set<std::string> seen;

  std::size_t pos = raw.find(kOpen);
  while (pos != std::string_view::npos) {
    const std::size_t content_begin = pos + kOpen.size();
    const std::size_t close = raw.find(kClose, content_begin);
    const std::size_t next_open = raw.find(kOpen, content_begin);

    if (close == std::string_view::npos || next_open < close) {
      // Damaged span: runs up to the next open tag (or end of input).
      const std::size_t end = std::min(next_open, raw.size());
      batch.rejected_spans.push_back(
          {RejectReason::unclosed, std::string(raw.substr(pos, end - pos))});
      pos = next_open;
      continue;
    }

    const std::string_view content = raw.substr(content_begin, close - content_begin);
    const std::string_view fragment = raw.substr(pos, close + kClose.size() - pos);
    pos = raw.find(kOpen, close + kClose.size());

    std::string text;
    try {
      text = validate_example(content, options.max_length);
    } catch (const ValidationError& e) {
      const auto reason =
          e.code() == "too_long" ? RejectReason::too_long : RejectReason::nested_tag;
      batch.rejected_spans.push_back({reason, std::string(fragment)});
      continue;
    }
    if (text.empty()) {
      batch.rejected_spans.push_back({RejectReason::empty, std::string(fragment)});
    } else if (seen.contains(text)) {
      batch.rejected_spans.push_back({RejectReason::duplicate, std::string(fragment)});
    } else if (batch.examples.size() >= expected) {
      seen.insert(text);
      batch.rejected_spans.push_back({RejectReason::overflow, std::string(fragment)});
    } else {
      seen.insert(text);
      batch.examples.push_back(std::move(text));
    }
  }
  batch.shortfall = expected > batch.examples.size() ? expected - batch.examples.size() : 0;
  return batch;
}

}  // namespace distill
