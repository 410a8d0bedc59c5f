#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mfs {

/// SplitMix64 finalizer. Used to derive independent child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` of `master`. Distinct (master, index) pairs
/// map to distinct seeds with overwhelming probability.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b) noexcept {
  return derive_seed(derive_seed(master, a), b);
}

using Rng = std::mt19937_64;

/// Deterministic iid standard normal draws.
inline std::vector<double> draw_standard_normals(std::uint64_t seed, std::size_t count) {
  std::vector<double> out(count);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace mfs
