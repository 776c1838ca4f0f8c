#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distill/corpus.hpp"
#include "distill/text.hpp"

namespace distill {

inline constexpr std::size_t kDefaultMattrWindow = 50;

/// Ordered token stream. Tokens are never empty strings.
class TokenSequence {
 public:
  TokenSequence() = default;
  /// Throws ValidationError if any token is empty.
  explicit TokenSequence(std::vector<std::string> tokens);

  static TokenSequence from_text(std::string_view text,
                                 const Tokenizer& tokenizer = default_tokenizer());

  void append(const TokenSequence& other);

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

 private:
  std::vector<std::string> tokens_;
};

/// Distinct tokens over total tokens.
double ttr(const TokenSequence& seq);

/// Moving-average TTR. Sequences no longer than `window` fall back to ttr;
/// otherwise the mean TTR over every contiguous window, via one sliding pass.
double mattr(const TokenSequence& seq, std::size_t window = kDefaultMattrWindow);

/// Same metric over pre-interned token ids.
double mattr_ids(std::span<const std::uint32_t> ids, std::size_t window);

enum class Side { instruction, response };

std::string_view to_string(Side side);

/// Concatenated token stream of one side of a subset, in stored order.
/// `subset` nullopt selects the union. Instructions are fused with inputs;
/// records without a response contribute nothing to the response side.
TokenSequence subset_tokens(const std::vector<InstructionRecord>& records,
                            std::optional<SubsetTag> subset, Side side,
                            const Tokenizer& tokenizer = default_tokenizer());

/// Throws ValidationError when the subset side has no tokens.
double subset_mattr(const std::vector<InstructionRecord>& records,
                    std::optional<SubsetTag> subset, Side side,
                    std::size_t window = kDefaultMattrWindow,
                    const Tokenizer& tokenizer = default_tokenizer());

struct DiversityRow {
  std::string subset;
  Side side = Side::instruction;
  std::size_t window = kDefaultMattrWindow;
  double mattr = 0.0;
  double ttr = 0.0;
  std::size_t tokens = 0;
};

/// One row per non-empty (subset, side), subsets in table order, union last.
std::vector<DiversityRow> diversity_report(const std::vector<InstructionRecord>& records,
                                           std::size_t window = kDefaultMattrWindow,
                                           const Tokenizer& tokenizer = default_tokenizer());

/// `subset,side,window,mattr_x100,ttr,tokens`
void write_diversity_csv(const std::vector<DiversityRow>& rows, std::ostream& out);
/// Dataset | X | Y table with MATTR up-scaled by 100.
void write_diversity_markdown(const std::vector<DiversityRow>& rows, std::ostream& out);

// ---------------------------------------------------------------------------
// Embedding statistics

using Vector = std::vector<double>;

inline constexpr std::size_t kMaxExactPairs = 1'000'000;

struct CosineStats {
  double mean_pairwise_cosine = 0.0;
  double stddev = 0.0;
  std::size_t pairs = 0;
  /// True when pairs were sampled instead of enumerated.
  bool sampled = false;
};

/// Mean and population standard deviation of cosine similarity over unordered
/// pairs. Exact up to kMaxExactPairs pairs, seeded sampling beyond.
CosineStats cosine_stats(std::span<const Vector> vectors, std::uint64_t seed = 0,
                         std::size_t max_exact_pairs = kMaxExactPairs);

struct PcaResult {
  /// One row of `dims` coordinates per input vector.
  std::vector<Vector> points;
  /// Eigenvalues of the sample covariance, largest first.
  std::vector<double> explained_variance;
  std::vector<Vector> components;
  /// Set when fewer than `dims` non-degenerate components exist; missing
  /// coordinates are zero.
  bool rank_deficient = false;
};

/// Mean-centred projection onto the top `dims` principal directions, found by
/// power iteration with deflation. Each component's first non-negligible
/// loading is positive.
PcaResult pca_project(std::span<const Vector> vectors, std::size_t dims = 2);

/// `id,x,y,label`
void write_pca_csv(const PcaResult& pca, std::span<const std::string> ids,
                   std::span<const std::string> labels, std::ostream& out);

}  // namespace distill
