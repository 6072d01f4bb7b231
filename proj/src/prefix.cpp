#include "kvsim/prefix.hpp"

namespace kvsim {

std::vector<PrefixKey> prefix_keys(std::span<const uint64_t> groups, uint64_t seed) {
  std::vector<PrefixKey> keys;
  keys.reserve(groups.size());
  uint64_t chain = seed;
  for (size_t i = 0; i < groups.size(); ++i) {
    chain = mix64(chain, groups[i]);
    keys.push_back(PrefixKey{chain, static_cast<uint32_t>(i)});
  }
  return keys;
}

}  // namespace kvsim
