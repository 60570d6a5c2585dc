#pragma once

// Portable, explicitly specified randomness. Every stochastic quantity in the
// project flows from one of three primitives defined here:
//
//   - SplitMix64: seed expander (Steele, Lea, Flood 2014 update/finalizer).
//   - Pcg64: main sequential stream, xoshiro256++ core seeded via SplitMix64.
//   - counter_gaussian(): random-access N(0,1) draws, a pure function of
//     (seed, index, coordinate). Used by the noise bank so access order can
//     never change a sample.
//
// Seed splitting: derive_stream(master, name) gives named child streams that
// are decoupled from one another (dataset / split / init / train / bank / ...).

#include <cmath>
#include <cstdint>
#include <string_view>

namespace fmlab {

inline constexpr uint64_t kSplitMix64Gamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer: bijective 64-bit mix.
constexpr uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

struct SplitMix64 {
  uint64_t state;
  explicit constexpr SplitMix64(uint64_t seed) : state(seed) {}
  constexpr uint64_t next() {
    state += kSplitMix64Gamma;
    return mix64(state);
  }
};

constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named child stream seed. Children of the same master with distinct names are
// decoupled; identical (master, name) always yields the same child.
constexpr uint64_t derive_stream(uint64_t master, std::string_view name) {
  return mix64(master ^ mix64(fnv1a64(name) + kSplitMix64Gamma));
}

// xoshiro256++ (Blackman & Vigna), state filled by SplitMix64.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1), 53-bit resolution.
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) {
    // Rejection-free modulo bias is negligible at desk scale, but the fix is
    // cheap, so take the unbiased route.
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // N(0,1) via Box-Muller; spare value cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static constexpr uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Pure-function uniform in [0,1) for (seed, index, coord, lane).
constexpr double counter_uniform(uint64_t seed, uint64_t index, uint64_t coord,
                                 uint64_t lane) {
  uint64_t h = mix64(seed + kSplitMix64Gamma * (1 + index));
  h = mix64(h ^ (coord * 0xd1342543de82ef95ULL));
  h = mix64(h ^ (lane * 0x2545f4914f6cdd1dULL));
  return (h >> 11) * 0x1.0p-53;
}

// Pure-function N(0,1) draw for coordinate `coord` of sample `index`.
inline double counter_gaussian(uint64_t seed, uint64_t index, uint64_t coord) {
  double u1 = counter_uniform(seed, index, coord, 0);
  double u2 = counter_uniform(seed, index, coord, 1);
  double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace fmlab
