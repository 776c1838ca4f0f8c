#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace distill {

/// Strips ASCII whitespace (space, \t, \n, \r, \f, \v) from both ends.
std::string_view trim(std::string_view text);

/// Splits on runs of ASCII whitespace; never yields empty tokens.
std::vector<std::string> whitespace_tokenize(std::string_view text);

/// Pluggable tokenizer used by corpus statistics and diversity metrics.
using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

Tokenizer default_tokenizer();

/// Unicode NFC normalization of UTF-8 text. Throws ValidationError on
/// invalid UTF-8.
std::string nfc_normalize(std::string_view utf8);

/// Number of Unicode code points in UTF-8 text (invalid bytes count as one).
std::size_t utf8_length(std::string_view utf8);

bool contains(std::string_view haystack, std::string_view needle);

/// ASCII case-insensitive substring search.
bool icontains(std::string_view haystack, std::string_view needle);

/// Current UTC time as `YYYY-MM-DDTHH:MM:SSZ`.
std::string utc_timestamp_now();

}  // namespace distill
