#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace onepixel {

// One step of Steele et al.'s SplitMix64. Used only to derive seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seedable uniform source backed by std::mt19937_64, which is bit-exact
// across platforms. The helpers below replace std::uniform_*_distribution,
// whose output is implementation-defined and therefore not reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform double in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, exact for any n >= 1.
  std::size_t below(std::size_t n) {
    const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= threshold) return static_cast<std::size_t>(r % n);
    }
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(T& seq) {
    for (std::size_t i = seq.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(seq[i - 1], seq[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Seed of an independent stream derived from a base seed. The evolution
// engine uses stream 0 for population initialization and stream g (g >= 1)
// for generation g, so runs are reproducible draw-for-draw.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed + stream * 0x9e3779b97f4a7c15ULL;
  return splitmix64(state);
}

// Per-image attack seed. Depends only on the campaign seed and the image id,
// never on worker scheduling, so campaign results are parallelism-invariant.
inline std::uint64_t derive_attack_seed(std::uint64_t campaign_seed,
                                        std::string_view image_id) {
  std::uint64_t state = campaign_seed ^ fnv1a64(image_id);
  return splitmix64(state);
}

}  // namespace onepixel
