#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace distill {

struct ReportInputs {
  std::optional<std::filesystem::path> stats;
  std::optional<std::filesystem::path> diversity;
  std::optional<std::filesystem::path> hallucination;
  std::optional<std::filesystem::path> toxicity;
  std::optional<std::filesystem::path> ratings;

  bool empty() const {
    return !stats && !diversity && !hallucination && !toxicity && !ratings;
  }
};

/// Renders CSV rows (header first) as a Markdown table.
void write_markdown_table(const std::vector<std::vector<std::string>>& rows,
                          std::ostream& out);

std::vector<std::vector<std::string>> read_csv_rows(std::istream& in);

/// One Markdown document with a section per supplied CSV. Throws
/// ValidationError when no input is given.
void write_report(const ReportInputs& inputs, std::ostream& out);

}  // namespace distill
