#include "distill/diversity.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "distill/csv.hpp"
#include "distill/errors.hpp"
#include "distill/sampling.hpp"

namespace distill {
namespace {

constexpr double kPowerTolerance = 1e-9;
constexpr int kPowerMaxIterations = 1000;

std::vector<std::uint32_t> intern(const std::vector<std::string>& tokens) {
  std::unordered_map<std::string_view, std::uint32_t> ids;
  ids.reserve(tokens.size());
  std::vector<std::uint32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const auto [it, inserted] = ids.try_emplace(t, static_cast<std::uint32_t>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

std::string fixed(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

TokenSequence::TokenSequence(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (const auto& t : tokens_) {
    if (t.empty()) throw ValidationError("empty_token", "token sequence contains an empty token");
  }
}

TokenSequence TokenSequence::from_text(std::string_view text, const Tokenizer& tokenizer) {
  return TokenSequence(tokenizer(text));
}

void TokenSequence::append(const TokenSequence& other) {
  tokens_.insert(tokens_.end(), other.tokens_.begin(), other.tokens_.end());
}

double ttr(const TokenSequence& seq) {
  if (seq.empty()) throw ValidationError("empty_sequence", "TTR of an empty sequence");
  const auto ids = intern(seq.tokens());
  const auto types = *std::max_element(ids.begin(), ids.end()) + 1;
  return static_cast<double>(types) / static_cast<double>(ids.size());
}

double mattr_ids(std::span<const std::uint32_t> ids, std::size_t window) {
  if (window < 1) throw ValidationError("window", "MATTR window must be >= 1");
  if (ids.empty()) throw ValidationError("empty_sequence", "MATTR of an empty sequence");
  const std::uint32_t alphabet = *std::max_element(ids.begin(), ids.end()) + 1;
  std::vector<std::uint32_t> counts(alphabet, 0);

  if (ids.size() <= window) {
    std::size_t types = 0;
    for (auto id : ids) types += counts[id]++ == 0;
    return static_cast<double>(types) / static_cast<double>(ids.size());
  }

  std::size_t types = 0;
  for (std::size_t i = 0; i < window; ++i) types += counts[ids[i]]++ == 0;
  // Sum of per-window type counts is an exact integer; divide once at the end.
  std::uint64_t type_sum = types;
  for (std::size_t i = window; i < ids.size(); ++i) {
    types -= --counts[ids[i - window]] == 0;
    types += counts[ids[i]]++ == 0;
    type_sum += types;
  }
  const std::size_t windows = ids.size() - window + 1;
  return static_cast<double>(type_sum) /
         (static_cast<double>(windows) * static_cast<double>(window));
}

double mattr(const TokenSequence& seq, std::size_t window) {
  if (window < 1) throw ValidationError("window", "MATTR window must be >= 1");
  if (seq.empty()) throw ValidationError("empty_sequence", "MATTR of an empty sequence");
  const auto ids = intern(seq.tokens());
  return mattr_ids(ids, window);
}

std::string_view to_string(Side side) {
  return side == Side::instruction ? "instruction" : "response";
}

TokenSequence subset_tokens(const std::vector<InstructionRecord>& records,
                            std::optional<SubsetTag> subset, Side side,
                            const Tokenizer& tokenizer) {
  std::vector<std::string> tokens;
  for (const auto& r : records) {
    if (subset && r.subset != *subset) continue;
    std::vector<std::string> part;
    if (side == Side::instruction) {
      part = tokenizer(full_instruction(r));
    } else if (r.response) {
      part = tokenizer(*r.response);
    }
    for (auto& t : part) tokens.push_back(std::move(t));
  }
  return TokenSequence(std::move(tokens));
}

double subset_mattr(const std::vector<InstructionRecord>& records,
                    std::optional<SubsetTag> subset, Side side, std::size_t window,
                    const Tokenizer& tokenizer) {
  const auto seq = subset_tokens(records, subset, side, tokenizer);
  if (seq.empty()) {
    throw ValidationError("empty_subset",
                          "subset " + std::string(subset ? to_string(*subset) : kUnionName) +
                              " has no " + std::string(to_string(side)) + " tokens");
  }
  return mattr(seq, window);
}

std::vector<DiversityRow> diversity_report(const std::vector<InstructionRecord>& records,
                                           std::size_t window, const Tokenizer& tokenizer) {
  std::vector<DiversityRow> rows;
  auto add = [&](std::optional<SubsetTag> subset) {
    for (Side side : {Side::instruction, Side::response}) {
      const auto seq = subset_tokens(records, subset, side, tokenizer);
      if (seq.empty()) continue;
      rows.push_back({std::string(subset ? to_string(*subset) : kUnionName), side, window,
                      mattr(seq, window), ttr(seq), seq.size()});
    }
  };
  for (SubsetTag tag : kAllSubsets) add(tag);
  add(std::nullopt);
  return rows;
}

void write_diversity_csv(const std::vector<DiversityRow>& rows, std::ostream& out) {
  out << "subset,side,window,mattr_x100,ttr,tokens\n";
  for (const auto& r : rows) {
    out << r.subset << ',' << to_string(r.side) << ',' << r.window << ','
        << fixed(r.mattr * 100.0, 2) << ',' << fixed(r.ttr, 6) << ',' << r.tokens << '\n';
  }
}

void write_diversity_markdown(const std::vector<DiversityRow>& rows, std::ostream& out) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::string, std::string>> cells;
  for (const auto& r : rows) {
    if (!cells.contains(r.subset)) order.push_back(r.subset);
    auto& cell = cells[r.subset];
    (r.side == Side::instruction ? cell.first : cell.second) = fixed(r.mattr * 100.0, 2);
  }
  out << "| Dataset | X (MATTR x100) | Y (MATTR x100) |\n";
  out << "|---|---:|---:|\n";
  for (const auto& name : order) {
    const auto& [x, y] = cells[name];
    out << "| " << name << " | " << (x.empty() ? "-" : x) << " | " << (y.empty() ? "-" : y)
        << " |\n";
  }
}

// ---------------------------------------------------------------------------

CosineStats cosine_stats(std::span<const Vector> vectors, std::uint64_t seed,
                         std::size_t max_exact_pairs) {
  const std::size_t n = vectors.size();
  if (n < 2) throw ValidationError("too_few_vectors", "cosine statistics need >= 2 vectors");
  const std::size_t dim = vectors[0].size();
  std::vector<Vector> unit;
  unit.reserve(n);
  for (const auto& v : vectors) {
    if (v.size() != dim) throw ValidationError("dimension", "vector dimension mismatch");
    const double len = norm(v);
    if (len == 0.0) throw ValidationError("zero_vector", "zero vector has no direction");
    Vector u(v);
    for (auto& x : u) x /= len;
    unit.push_back(std::move(u));
  }

  CosineStats stats;
  // Welford keeps the variance stable over 10^6 terms.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t count = 0;
  auto push = [&](double c) {
    ++count;
    const double delta = c - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (c - mean);
  };

  const long double total_pairs = static_cast<long double>(n) * (n - 1) / 2;
  if (total_pairs <= static_cast<long double>(max_exact_pairs)) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) push(dot(unit[i], unit[j]));
    }
  } else {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (count < max_exact_pairs) {
      const std::size_t i = pick(rng);
      const std::size_t j = pick(rng);
      if (i != j) push(dot(unit[i], unit[j]));
    }
    stats.sampled = true;
  }
  stats.pairs = count;
  stats.mean_pairwise_cosine = mean;
  stats.stddev = std::sqrt(std::max(0.0, m2 / static_cast<double>(count)));
  return stats;
}

PcaResult pca_project(std::span<const Vector> vectors, std::size_t dims) {
  const std::size_t n = vectors.size();
  if (dims < 1) throw ValidationError("dims", "PCA needs at least one output dimension");
  if (n < dims) throw ValidationError("too_few_vectors", "PCA needs at least `dims` vectors");
  const std::size_t d = vectors[0].size();
  for (const auto& v : vectors) {
    if (v.size() != d) throw ValidationError("dimension", "vector dimension mismatch");
  }

  Vector mean(d, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += v[k];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<Vector> centered(n, Vector(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) centered[i][k] = vectors[i][k] - mean[k];
  }

  // Sample covariance, d x d.
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  std::vector<Vector> cov(d, Vector(d, 0.0));
  for (const auto& row : centered) {
    for (std::size_t a = 0; a < d; ++a) {
      if (row[a] == 0.0) continue;
      for (std::size_t b = a; b < d; ++b) cov[a][b] += row[a] * row[b];
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov[a][b] /= denom;
      cov[b][a] = cov[a][b];
    }
    trace += cov[a][a];
  }

  PcaResult result;
  const double degenerate = trace * 1e-10;
  Rng rng(0x5ca1ab1e);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (std::size_t c = 0; c < std::min(dims, d); ++c) {
    Vector v(d);
    for (auto& x : v) x = normal(rng);
    auto orthogonalize = [&](Vector& w) {
      for (const auto& prev : result.components) {
        const double p = dot(w, prev);
        for (std::size_t k = 0; k < d; ++k) w[k] -= p * prev[k];
      }
    };
    orthogonalize(v);
    double len = norm(v);
    if (len == 0.0) break;
    for (auto& x : v) x /= len;

    double eigenvalue = 0.0;
    for (int it = 0; it < kPowerMaxIterations; ++it) {
      Vector w(d, 0.0);
      for (std::size_t a = 0; a < d; ++a) w[a] = dot(cov[a], v);
      orthogonalize(w);  // deflation against found components
      eigenvalue = dot(w, v);
      len = norm(w);
      if (len <= degenerate) {
        eigenvalue = 0.0;
        break;
      }
      for (auto& x : w) x /= len;
      double diff = 0.0;
      for (std::size_t k = 0; k < d; ++k) diff = std::max(diff, std::abs(w[k] - v[k]));
      v = std::move(w);
      if (diff < kPowerTolerance) break;
    }
    if (eigenvalue <= degenerate) break;

    for (const double x : v) {
      if (std::abs(x) > 1e-12) {
        if (x < 0) {
          for (auto& y : v) y = -y;
        }
        break;
      }
    }
    Vector cv(d, 0.0);
    for (std::size_t a = 0; a < d; ++a) cv[a] = dot(cov[a], v);
    result.explained_variance.push_back(dot(cv, v));
    result.components.push_back(std::move(v));
  }

  result.rank_deficient = result.components.size() < dims;
  result.points.assign(n, Vector(dims, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < result.components.size(); ++c) {
      result.points[i][c] = dot(centered[i], result.components[c]);
    }
  }
  return result;
}

void write_pca_csv(const PcaResult& pca, std::span<const std::string> ids,
                   std::span<const std::string> labels, std::ostream& out) {
  if (ids.size() != pca.points.size() || labels.size() != pca.points.size()) {
    throw ValidationError("size", "ids/labels must match the number of points");
  }
  out << "id,x,y,label\n";
  for (std::size_t i = 0; i < pca.points.size(); ++i) {
    const auto& p = pca.points[i];
    out << csv::escape(ids[i]) << ',' << std::setprecision(17) << p[0] << ','
        << (p.size() > 1 ? p[1] : 0.0) << ',' << csv::escape(labels[i]) << '\n';
  }
}

}  // namespace distill
