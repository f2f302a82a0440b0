#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>

namespace imhs {

/// Uniform integer in [0, bound) by rejection sampling. Unlike
/// std::uniform_int_distribution the result is identical on every standard
/// library, which keeps seeded shuffles reproducible across platforms.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  constexpr auto max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

template <typename T>
void seeded_shuffle(std::span<T> items, std::mt19937_64& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    std::swap(items[i], items[uniform_below(rng, i + 1)]);
  }
}

}  // namespace imhs
