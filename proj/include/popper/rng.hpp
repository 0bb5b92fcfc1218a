#pragma once

#include <cstdint>

namespace popper::rng {

// SplitMix64 finalizer. Bijective on u64; used both as the counter-RNG output
// stage and as a general-purpose hash mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Order-sensitive fold for hashing sequences of words.
constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

// Counter-based stream: the i-th output is a pure function of
// (seed, stream_id, salt, i), so replicates need no shared state and a longer
// run extends a shorter run's draw sequence exactly (common random numbers).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t salt)
      : key_(hash_combine(hash_combine(mix64(seed), stream_id), salt)) {}

  std::uint64_t next_u64() { return mix64(key_ + counter_++ * 0x9e3779b97f4a7c15ull); }

  // Uniform on (0, 1]: 53-bit mantissa, zero excluded so log() is always finite.
  double uniform_positive() {
    const std::uint64_t bits = next_u64() >> 11;
    return static_cast<double>(bits + 1) * 0x1.0p-53;
  }

  std::uint64_t index() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace popper::rng
