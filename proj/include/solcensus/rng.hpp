#pragma once

#include <cstdint>
#include <initializer_list>

namespace solcensus {

// Deterministic generators, fully specified here so that identical seeds give
// identical streams on every platform and at every optimization level.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// xoshiro256++ with splitmix64 seeding.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  // Child stream: mixes the tags into the seed so parallel chunks and
  // repeated phases get independent, reproducible substreams.
  Rng derive(std::initializer_list<std::uint64_t> tags) const {
    std::uint64_t acc = s_[0] ^ 0x6a09e667f3bcc909ull;
    for (std::uint64_t t : tags) {
      acc ^= t + 0x9e3779b97f4a7c15ull + (acc << 6) + (acc >> 2);
      (void)splitmix64(acc);
    }
    return Rng(acc);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Unbiased bounded draw (rejection on the top range).
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) return 0;
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  long next_int(long lo, long hi) {  // inclusive range
    return lo + static_cast<long>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  double next_double() {  // [0, 1), 53 random bits
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

}  // namespace solcensus
