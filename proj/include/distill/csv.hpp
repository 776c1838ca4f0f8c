#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace distill::csv {

/// One parsed row plus the 1-based line number it started on.
struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

/// RFC 4180 reader: comma separated, `"` quoting with `""` escapes, quoted
/// fields may span lines. Accepts LF or CRLF line endings.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next non-blank row, or nullopt at end of input. Throws ParseError on an
  /// unterminated quoted field.
  std::optional<Row> next();

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

/// Quotes a field when it contains a comma, quote, or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace distill::csv
