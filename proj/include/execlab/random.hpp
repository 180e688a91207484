#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace execlab {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 20100506ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for a named component of a run; independent of every other component.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view component) noexcept {
  return splitmix64(seed ^ fnv1a64(component));
}

/// Seed for the i-th independent draw of a Monte Carlo loop.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) + index);
}

}  // namespace execlab
