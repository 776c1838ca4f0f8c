#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace distill {

/// Seeded engine shared by every sampling operation.
using Rng = std::mt19937_64;

/// Uniform sample of min(k, population) distinct indices in [0, population),
/// in draw order. Partial Fisher-Yates; deterministic for a fixed seed.
inline std::vector<std::size_t> sample_indices(std::size_t population,
                                               std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, population);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

inline std::vector<std::size_t> sample_indices(std::size_t population,
                                               std::size_t k,
                                               std::uint64_t seed) {
  Rng rng(seed);
  return sample_indices(population, k, rng);
}

}  // namespace distill
