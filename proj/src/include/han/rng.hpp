#pragma once

// Self-contained deterministic RNG. Results must be reproducible bit-for-bit
// across compilers and standard libraries, so no std::uniform_* distributions
// are used anywhere in the toolkit.

#include <cmath>
#include <cstdint>
#include <vector>

namespace han {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mixes a seed with an arbitrary number of stream tags so that independent
// consumers (per-epoch shuffles, per-tensor initializers, per-patient noise)
// never share a stream.
inline std::uint64_t mix_seed(std::uint64_t seed) {
  std::uint64_t s = seed;
  return splitmix64(s);
}

template <class... Tags>
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ (tag + 0x9e3779b97f4a7c15ULL);
  if constexpr (sizeof...(rest) == 0) {
    return splitmix64(s);
  } else {
    return mix_seed(splitmix64(s), rest...);
  }
}

// FNV-1a, used to derive stable per-tensor stream tags from tensor names.
inline std::uint64_t fnv1a(const char* s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (; *s; ++s) {
    h ^= static_cast<unsigned char>(*s);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// xoshiro256++ (Blackman/Vigna), seeded through splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) {
      return (x << k) | (x >> (64 - k));
    };
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

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) via rejection sampling.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform01() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Glorot/Xavier uniform for a fan_in x fan_out connection.
  double glorot(std::size_t fan_in, std::size_t fan_out) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform(-limit, limit);
  }

 private:
  std::uint64_t s_[4];
};

}  // namespace han
