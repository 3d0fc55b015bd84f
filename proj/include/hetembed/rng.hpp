#pragma once
// Deterministic randomness. Every stream is an mt19937_64 seeded by hashing
// (master seed, component label, indices), so independent components and
// parallel shards draw from disjoint, reproducible streams. Distribution
// helpers are hand rolled: std:: distributions are implementation-defined
// and would break the byte-identical-output contract across toolchains.

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace hetembed {

using Rng = std::mt19937_64;

// splitmix64 finalizer
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t a = 0,
                            uint64_t b = 0) {
  uint64_t h = mix64(master);
  for (char c : label) h = mix64(h ^ static_cast<unsigned char>(c));
  h = mix64(h ^ a);
  return mix64(h ^ b);
}

inline Rng make_rng(uint64_t master, std::string_view label, uint64_t a = 0, uint64_t b = 0) {
  return Rng(derive_seed(master, label, a, b));
}

// Uniform integer in [0, n); n > 0. Modulo bias is ~n/2^64, irrelevant here.
inline size_t uniform_index(Rng& rng, size_t n) { return static_cast<size_t>(rng() % n); }

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) { return (rng() >> 11) * (1.0 / 9007199254740992.0); }

inline double uniform_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Fisher-Yates; std::shuffle's draw sequence is implementation-defined, this is not.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

}  // namespace hetembed
