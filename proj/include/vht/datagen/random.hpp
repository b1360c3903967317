#pragma once

#include <cstdint>
#include <limits>

namespace vht::datagen {

/// SplitMix64: tiny, fast, and good enough for seeding and sampling; also a
/// UniformRandomBitGenerator so the std distributions accept it.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Independent stream for item `index` under `seed` (with a per-purpose salt).
inline SplitMix64 rng_for(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
  SplitMix64 mix(seed ^ (salt * 0xd6e8feb86659fd93ULL));
  const std::uint64_t a = mix();
  SplitMix64 mix2(a ^ (index * 0x9e3779b97f4a7c15ULL));
  return SplitMix64(mix2());
}

}  // namespace vht::datagen
