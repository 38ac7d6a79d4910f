#include "agral/rng.hpp"

namespace agral {

std::uint64_t Rng::next_below(std::uint64_t bound) {
  if (bound == 0) return 0;
  // Reject the tail of the 2^64 range that would bias the modulus.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound + 1) % bound;
  std::uint64_t v = next_u64();
  while (v > limit) v = next_u64();
  return v % bound;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  // splitmix64 finalizer over a hash-combined pair.
  std::uint64_t z = base ^ (salt + 0x9E3779B97F4A7C15ULL + (base << 6) + (base >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_id(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace agral
