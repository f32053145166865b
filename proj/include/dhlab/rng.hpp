#pragma once

#include <cstdint>

namespace dhlab::rng {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

/// Counter-based generator: a pure function of (key, stream, counter).
/// Distinct triples give independent-looking 64-bit words, so any entry can
/// be produced in any order by any worker.
constexpr std::uint64_t hash3(std::uint64_t key, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t x = mix64(key + 0x9e3779b97f4a7c15ULL);
  x = mix64(x ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
  x = mix64(x ^ (counter * 0x8cb92ba72f3d8dd7ULL + 0x2545f4914f6cdd1dULL));
  return x;
}

/// Seed of sample `index` in an ensemble keyed by `base`.
constexpr std::uint64_t sample_seed(std::uint64_t base, std::uint64_t index) {
  return hash3(base, 0x5a4d504c45ULL, index);
}

/// Uniform double in [0,1) with 53 random bits.
constexpr double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

constexpr double uniform(std::uint64_t key, std::uint64_t stream, std::uint64_t counter) {
  return to_unit(hash3(key, stream, counter));
}

}  // namespace dhlab::rng
