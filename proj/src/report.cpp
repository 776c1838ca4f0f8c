#include "distill/report.hpp"

#include <fstream>
#include <map>

#include "distill/csv.hpp"
#include "distill/errors.hpp"

namespace distill {
namespace {

std::vector<std::vector<std::string>> read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  auto rows = read_csv_rows(in);
  if (rows.empty()) throw ValidationError("empty_csv", path.string() + " is empty");
  return rows;
}

std::string cell(std::string text) {
  for (auto pos = text.find('|'); pos != std::string::npos; pos = text.find('|', pos + 2)) {
    text.replace(pos, 1, "\\|");
  }
  return text;
}

/// Diversity rows pivoted to one line per subset with X and Y columns.
std::vector<std::vector<std::string>> pivot_diversity(
    const std::vector<std::vector<std::string>>& rows) {
  const auto& header = rows.front();
  auto col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ValidationError("diversity_csv", "diversity CSV lacks column '" + name + "'");
  };
  const auto subset = col("subset"), side = col("side"), value = col("mattr_x100"),
             window = col("window");
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::string, std::string>> cells;
  std::string win;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) continue;
    if (!cells.contains(row[subset])) order.push_back(row[subset]);
    (row[side] == "instruction" ? cells[row[subset]].first : cells[row[subset]].second) =
        row[value];
    win = row[window];
  }
  std::vector<std::vector<std::string>> out{{"Dataset", "X (MATTR x100, window " + win + ")",
                                             "Y (MATTR x100, window " + win + ")"}};
  for (const auto& name : order) {
    const auto& [x, y] = cells[name];
    out.push_back({name, x.empty() ? "-" : x, y.empty() ? "-" : y});
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> read_csv_rows(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::vector<std::string>> rows;
  while (auto row = reader.next()) rows.push_back(std::move(row->fields));
  return rows;
}

void write_markdown_table(const std::vector<std::vector<std::string>>& rows,
                          std::ostream& out) {
  if (rows.empty()) return;
  const auto& header = rows.front();
  out << '|';
  for (const auto& h : header) out << ' ' << cell(h) << " |";
  out << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out << (i == 0 ? "---|" : "---:|");
  out << '\n';
  for (std::size_t r = 1; r < rows.size(); ++r) {
    out << '|';
    for (const auto& c : rows[r]) out << ' ' << cell(c) << " |";
    out << '\n';
  }
}

void write_report(const ReportInputs& inputs, std::ostream& out) {
  if (inputs.empty()) throw ValidationError("no_inputs", "report needs at least one input CSV");
  out << "# Distillation corpus report\n";
  if (inputs.stats) {
    out << "\n## Data statistics\n\nAverage lengths are in tokens.\n\n";
    write_markdown_table(read_file(*inputs.stats), out);
  }
  if (inputs.diversity) {
    out << "\n## Lexical diversity\n\n";
    write_markdown_table(pivot_diversity(read_file(*inputs.diversity)), out);
  }
  if (inputs.hallucination) {
    out << "\n## Hallucinations (lower is better, at most 10 per category)\n\n";
    write_markdown_table(read_file(*inputs.hallucination), out);
  }
  if (inputs.toxicity) {
    out << "\n## Toxic outputs by prompt bucket\n\n";
    write_markdown_table(read_file(*inputs.toxicity), out);
  }
  if (inputs.ratings) {
    out << "\n## Human ratings (A best, D worst)\n\n";
    write_markdown_table(read_file(*inputs.ratings), out);
  }
}

}  // namespace distill
