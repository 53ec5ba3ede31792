#pragma once

#include <cstdint>
#include <random>

namespace masm {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for an independent stream, a pure function of (master, index, salt).
// Trial seeds depend only on the trial index, never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t salt = 0) {
  return mix64(mix64(master ^ mix64(salt)) + index);
}

}  // namespace masm
