#pragma once

#include <cstdint>
#include <random>

namespace tsr {

/// PRNG used everywhere in the library. Determinism is per implementation:
/// std::normal_distribution is library-defined, so streams are not portable
/// across standard libraries.
using Rng = std::mt19937_64;

/// splitmix64 finalizer; derives well-separated child seeds from (base, index).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace tsr
