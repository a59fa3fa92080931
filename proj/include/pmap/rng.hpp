#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace pmap {

// Euler-Mascheroni constant at full double precision. Gumbel(-c) noise has
// mean zero, which is why it appears throughout the perturbation machinery.
inline constexpr double kEulerGamma = 0.57721566490153286;

namespace detail {

// splitmix64 finalizer (Steele, Lea, Flood 2014). Also used as the key-mixing
// step for deriving sub-streams.
inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// xoshiro256++ (Blackman, Vigna 2019), seeded by running splitmix64 four
// times over the 64-bit seed. Small, fast, and simple enough that tests can
// reconstruct the stream independently.
//
// Sub-stream derivation: derive_key chains the splitmix64 finalizer over the
// path elements, so the stream for (seed, i, j, ...) is a pure function of
// the seed and the indices. Every Monte Carlo draw in this library runs on a
// stream derived from (seed, draw indices), which makes results independent
// of scheduling and worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = detail::splitmix64(sm);
  }

  static std::uint64_t derive_key(std::uint64_t seed,
                                  std::initializer_list<std::uint64_t> path) {
    std::uint64_t key = seed;
    for (std::uint64_t index : path) {
      std::uint64_t s = key ^ (index + 0x9e3779b97f4a7c15ULL);
      key = detail::splitmix64(s);
    }
    return key;
  }

  static Rng derive(std::uint64_t seed,
                    std::initializer_list<std::uint64_t> path) {
    return Rng(derive_key(seed, path));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result =
        detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1); zero is redrawn.
  double next_open01() {
    double u;
    do {
      u = next_double();
    } while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Gumbel(-c) via inverse CDF: -ln(-ln u) - c with u uniform on (0, 1).
  double gumbel() { return -std::log(-std::log(next_open01())) - kEulerGamma; }

  // Exponential with unit rate.
  double exponential() { return -std::log(next_open01()); }

 private:
  std::uint64_t state_[4];
};

// Free-function form used where a noise source is passed around.
inline double sample_gumbel(Rng& rng) { return rng.gumbel(); }

}  // namespace pmap
