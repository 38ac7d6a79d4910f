#pragma once

#include <cstdint>
#include <string_view>

namespace agral {

// Deterministic 64-bit generator (splitmix64). Every seeded stream in the
// project goes through this type so results do not depend on the platform's
// std::uniform_* implementations or on scheduling order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Rejection sampling, unbiased.
  std::uint64_t next_below(std::uint64_t bound);

  // Uniform in [lo, hi).
  double next_in(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  std::uint64_t state_;
};

// Combines a base seed with a salt into a new stream seed. Used to derive
// schedule-independent per-image / per-sample / per-repetition streams.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t s1, std::uint64_t s2) {
  return mix_seed(mix_seed(base, s1), s2);
}

// FNV-1a over the bytes of an identifier, for seeding per-image streams.
std::uint64_t hash_id(std::string_view id);

// Salts naming the independent random streams of a run.
namespace stream {
inline constexpr std::uint64_t kWeightInit = 0x5749ULL;   // "WI"
inline constexpr std::uint64_t kShuffle = 0x5348ULL;      // "SH"
inline constexpr std::uint64_t kInitialPick = 0x4950ULL;  // "IP"
inline constexpr std::uint64_t kSelect = 0x534CULL;       // "SL"
inline constexpr std::uint64_t kMonteCarlo = 0x4D43ULL;   // "MC"
inline constexpr std::uint64_t kRepetition = 0x5250ULL;   // "RP"
}  // namespace stream

}  // namespace agral
