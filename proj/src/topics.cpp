#include "distill/topics.hpp"

#include <charconv>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "distill/errors.hpp"
#include "distill/sampling.hpp"
#include "distill/text.hpp"
#include "distill/transport.hpp"

namespace distill {
namespace {

std::int64_t parse_count(std::string_view field, std::size_t line, const char* what) {
  field = trim(field);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(line, std::string("invalid ") + what + " count '" + std::string(field) + "'");
  }
  if (value < 0) {
    throw ParseError(line, std::string("negative ") + what + " count");
  }
  return value;
}

std::string url_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  return out;
}

}  // namespace

TopicEntry make_topic(std::string title, std::int64_t subcategories, std::int64_t pages) {
  if (subcategories < 0 || pages < 0) {
    throw ValidationError("negative_count", "negative count for category '" + title + "'");
  }
  TopicEntry e;
  e.word_count = static_cast<std::int64_t>(whitespace_tokenize(title).size());
  e.title = std::move(title);
  e.subcategory_count = subcategories;
  e.page_count = pages;
  return e;
}

std::vector<TopicEntry> ingest_categories(std::istream& in) {
  std::vector<TopicEntry> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos || line.find('\t', tab2 + 1) != std::string::npos) {
      throw ParseError(lineno, "expected 3 tab-separated columns");
    }
    const std::string_view view(line);
    const auto sub = view.substr(tab1 + 1, tab2 - tab1 - 1);
    const auto pages = view.substr(tab2 + 1);
    if (lineno == 1 && trim(sub) == "subcategories" && trim(pages) == "pages") continue;
    std::string title(trim(view.substr(0, tab1)));
    if (title.empty()) throw ParseError(lineno, "empty category title");
    if (!seen.insert(title).second) continue;
    out.push_back(make_topic(std::move(title), parse_count(sub, lineno, "subcategory"),
                             parse_count(pages, lineno, "page")));
  }
  return out;
}

std::vector<TopicEntry> ingest_categories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return ingest_categories(in);
}

std::vector<TopicEntry> fetch_categories(HttpTransport& transport,
                                         const std::string& api_url,
                                         std::size_t limit) {
  std::vector<TopicEntry> out;
  std::unordered_set<std::string> seen;
  std::string cont;
  while (out.size() < limit) {
    std::string url = api_url +
                      "?action=query&list=allcategories&acprop=size&aclimit=500&format=json";
    if (!cont.empty()) url += "&accontinue=" + url_encode(cont);
    const HttpResponse resp = transport.send({"GET", url, ""});
    if (resp.status != 200) {
      throw TransportError(resp.status, 1, "category API returned status " +
                                               std::to_string(resp.status) + " " + resp.error);
    }
    const auto body = nlohmann::json::parse(resp.body, nullptr, false);
    if (body.is_discarded() || !body.contains("query")) {
      throw IntegrityError("malformed category API response");
    }
    for (const auto& c : body["query"].value("allcategories", nlohmann::json::array())) {
      if (out.size() >= limit) break;
      std::string title = c.value("*", c.value("category", std::string()));
      if (title.empty() || !seen.insert(title).second) continue;
      out.push_back(make_topic(std::move(title), c.value("subcats", std::int64_t{0}),
                               c.value("pages", std::int64_t{0})));
    }
    const auto next = body.find("continue");
    if (next == body.end() || !next->contains("accontinue")) break;
    cont = (*next)["accontinue"].get<std::string>();
  }
  return out;
}

bool is_common_topic(const TopicEntry& entry) {
  return entry.word_count < 3 && entry.subcategory_count > 10 && entry.page_count > 50;
}

std::vector<TopicEntry> filter_topics(const std::vector<TopicEntry>& entries) {
  std::vector<TopicEntry> kept;
  for (const auto& e : entries) {
    if (is_common_topic(e)) kept.push_back(e);
  }
  return kept;
}

std::array<std::string, 3> sample_topics(const std::vector<std::string>& pool,
                                         std::uint64_t seed) {
  if (pool.size() < 3) throw ValidationError("pool_size", "topic pool has fewer than 3 entries");
  const auto idx = sample_indices(pool.size(), 3, seed);
  return {pool[idx[0]], pool[idx[1]], pool[idx[2]]};
}

std::vector<std::string> read_topic_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    std::string t(trim(line));
    if (!t.empty() && seen.insert(t).second) out.push_back(std::move(t));
  }
  return out;
}

void write_topic_list(const std::vector<TopicEntry>& topics, std::ostream& out) {
  for (const auto& t : topics) out << t.title << '\n';
}

}  // namespace distill
