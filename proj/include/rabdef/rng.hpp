#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace rabdef {

// splitmix64 finalizer; used to derive independent stream seeds from
// (seed, salt, index) tuples without correlated low bits.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return mix_seed(a ^ mix_seed(b)); }

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
  return mix_seed(mix_seed(a, b) ^ mix_seed(c));
}

// Deterministic RNG with explicitly coded sampling algorithms. The
// std::*_distribution classes are implementation-defined, and reruns must be
// byte-identical, so every draw is produced here from raw mt19937_64 output.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t raw() { return engine_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller, one value per pair of uniforms (no cached spare, so the
  // draw count stays predictable).
  double normal() {
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Bounded draw via 128-bit multiply (Lemire); n must be nonzero.
  size_t below(size_t n) {
    auto wide = static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n);
    return static_cast<size_t>(wide >> 64);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
};

}  // namespace rabdef
