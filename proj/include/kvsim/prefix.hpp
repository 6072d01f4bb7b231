#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace kvsim {

// Golden-ratio constant, also the default chain seed.
inline constexpr uint64_t kDefaultPrefixSeed = 0x9e3779b97f4a7c15ull;

// Combine a chain value with the next group hash and avalanche the result
// (splitmix64 finalizer). Position-sensitive: mix64(a,b) != mix64(b,a) in general.
constexpr uint64_t mix64(uint64_t chain, uint64_t next) {
  uint64_t x = chain ^ (next + 0x9e3779b97f4a7c15ull + (chain << 6) + (chain >> 2));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

// Identity of the token prefix ending at a group boundary. Two sequences get
// equal keys at index i only if they agree on groups 0..i (collisions aside).
struct PrefixKey {
  uint64_t value = 0;
  uint32_t group_index = 0;

  friend bool operator==(const PrefixKey&, const PrefixKey&) = default;
};

// key(0) = mix64(seed, g0); key(i) = mix64(key(i-1), g(i)).
std::vector<PrefixKey> prefix_keys(std::span<const uint64_t> groups,
                                   uint64_t seed = kDefaultPrefixSeed);

}  // namespace kvsim
