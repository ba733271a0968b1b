#pragma once

#include <array>
#include <cstdint>

namespace robustlab {

// splitmix64 step: advances `state` and returns the next output.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// k-th output (0-indexed) of the splitmix64 stream seeded with `seed`.
// Used to derive independent sub-streams: inserting a later stream never
// changes an earlier one.
inline std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t state = seed + k * 0x9E3779B97F4A7C15ULL;
  return splitmix64_next(state);
}

// Deterministic 64-bit generator: xoshiro256** seeded through splitmix64.
// Pure integer arithmetic, so the sample stream is identical on every
// platform for a given seed.
class RngState {
 public:
  RngState() : RngState(from_seed(0)) {}

  static RngState from_seed(std::uint64_t seed) {
    RngState r;
    std::uint64_t sm = seed;
    for (auto& w : r.s_) w = splitmix64_next(sm);
    r.has_spare_ = false;
    return r;
  }

  // Sub-stream k of `seed`: xoshiro seeded from splitmix64(seed)[k].
  static RngState substream(std::uint64_t seed, std::uint64_t k) {
    return from_seed(splitmix64_at(seed, k));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53-bit resolution.
  double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n).
  std::uint64_t bounded(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; transcendentals snapped for
  // cross-platform stability (see util.hpp).
  double normal();

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace robustlab
