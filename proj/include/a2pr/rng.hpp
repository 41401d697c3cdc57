#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace a2pr {

// xoshiro256** with splitmix64 seeding. The engine is 4 words of state,
// which keeps checkpoint serialization trivial, and every draw consumes a
// fixed number of engine steps so streams replay exactly.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : state_) w = splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (cosine branch). Exactly two uniforms per
  // call, so the stream position does not depend on the values drawn.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Rejection-free would bias for huge n; n here is a dataset size, far
    // below 2^53, so the double path keeps the stream layout simple.
    return static_cast<uint64_t>(uniform() * static_cast<double>(n));
  }

  // Independent stream derived from a seed and a tag list. Stateless, so
  // per-episode evaluation streams can be rebuilt from scratch anywhere.
  static Rng derive(uint64_t seed, uint64_t tag_a, uint64_t tag_b = 0,
                    uint64_t tag_c = 0) {
    uint64_t x = seed;
    x = splitmix64(x) ^ tag_a;
    x = splitmix64(x) ^ tag_b;
    x = splitmix64(x) ^ tag_c;
    return Rng(splitmix64(x));
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::array<uint64_t, 4> state_{};
};

}  // namespace a2pr
