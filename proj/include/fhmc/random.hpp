#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fhmc {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for deriving independent streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a unit of work identified by `path` under `master`. Results that
// depend only on derived seeds are independent of scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t p : path) {
    h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  }
  return h;
}

} // namespace fhmc
