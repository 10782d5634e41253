#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace adac {

// Deterministic random stream. Distribution mapping is hand-rolled on top of
// mt19937_64 so sequences are identical across platforms and stdlib versions,
// which the reproducibility contract (byte-identical reruns) depends on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : Rng(mix(seed, stream)) {}

  // Independent child stream; forking does not advance this stream.
  Rng fork(std::uint64_t tag) const { return Rng(mix(seed_, tag ^ 0x9e3779b97f4a7c15ULL)); }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw exactly uniform.
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller (two uniforms per draw, no cached state).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // u1 == 0 would take log(0); nudge into (0, 1].
    u1 = 1.0 - u1;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words.
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace adac
