#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace distill {

class HttpTransport;

/// A Wikipedia category with its size counters.
struct TopicEntry {
  std::string title;
  std::int64_t word_count = 0;
  std::int64_t subcategory_count = 0;
  std::int64_t page_count = 0;

  bool operator==(const TopicEntry&) const = default;
};

TopicEntry make_topic(std::string title, std::int64_t subcategories, std::int64_t pages);

/// Reads `title<TAB>subcategories<TAB>pages` rows. A first row whose count
/// columns are literally `subcategories`/`pages` is taken as a header.
/// Duplicate titles keep the first row. Throws ParseError on malformed or
/// negative counts.
std::vector<TopicEntry> ingest_categories(std::istream& in);
std::vector<TopicEntry> ingest_categories(const std::filesystem::path& path);

/// Pages through a MediaWiki `list=allcategories&acprop=size` endpoint.
/// `api_url` is the api.php path relative to the transport's base URL;
/// `limit` caps the number of categories.
std::vector<TopicEntry> fetch_categories(HttpTransport& transport,
                                         const std::string& api_url,
                                         std::size_t limit);

/// Keeps entries with fewer than three words and strictly more than 10
/// subcategories and 50 pages, in input order.
bool is_common_topic(const TopicEntry& entry);
std::vector<TopicEntry> filter_topics(const std::vector<TopicEntry>& entries);

/// Three distinct titles, uniform without replacement.
std::array<std::string, 3> sample_topics(const std::vector<std::string>& pool,
                                         std::uint64_t seed);

/// One title per line.
std::vector<std::string> read_topic_list(const std::filesystem::path& path);
void write_topic_list(const std::vector<TopicEntry>& topics, std::ostream& out);

}  // namespace distill
