#pragma once

#include <cmath>
#include <cstdint>

namespace railhaz::rng {

// Portable deterministic PRNG used by every randomized component.
//
// Streams are reproducible bit-for-bit on any platform/compiler:
//   * state seeding: splitmix64 applied to the user seed, four outputs
//     initialize xoshiro256++,
//   * generation: xoshiro256++ (Blackman/Vigna), 64-bit outputs,
//   * uniform doubles take the top 53 bits: (x >> 11) * 2^-53,
//   * derived per-unit streams (train i): reseed with seed ^ mix64(i + 1).
// Only these primitives are used; std:: distributions are avoided because
// their output sequences are implementation-defined.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class xoshiro256pp {
 public:
  explicit xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) {
      sm += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = sm;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      word = z ^ (z >> 31);
    }
  }

  // Stream for the i-th simulated unit under a base seed.
  static xoshiro256pp for_unit(std::uint64_t seed, std::uint64_t unit) {
    return xoshiro256pp{seed ^ mix64(unit + 1)};
  }

  std::uint64_t next() {
    auto const rotl = [](std::uint64_t x, int k) {
      return (x << k) | (x >> (64 - k));
    };
    std::uint64_t const result = rotl(state_[0] + state_[3], 23) + state_[0];
    std::uint64_t const t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Exponential with the given rate; rate must be > 0.
  double exponential(double rate) {
    return -std::log1p(-uniform()) / rate;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Integer in [0, n) by rejection-free scaling (n must be small vs 2^53).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  // Standard normal via Box-Muller (polar form avoided to keep the
  // consumption count deterministic: always two uniforms per call pair).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double const u1 = 1.0 - uniform();
    double const u2 = uniform();
    double const r = std::sqrt(-2.0 * std::log(u1));
    double const theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace railhaz::rng
