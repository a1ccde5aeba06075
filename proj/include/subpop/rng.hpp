#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace subpop {

/// splitmix64 step; used only to derive well-separated seeds for subsidiary
/// streams from (base seed, stream tag) pairs.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic seed for stream `tag` under `base`. Two steps of splitmix64
/// so that (base, 0) and (base+1, 0) do not collide with (base, 1).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t s = base;
  std::uint64_t a = splitmix64_next(s);
  s ^= tag * 0x9e3779b97f4a7c15ULL;
  std::uint64_t b = splitmix64_next(s);
  return a ^ (b + 0x632be59bd9b4e019ULL);
}

/// Random stream with bit-reproducible output across platforms: mt19937_64
/// (sequence fixed by the standard), 53-bit uniforms, and Marsaglia polar
/// normals. No std::*_distribution is used anywhere, since those are
/// implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via the polar method; the spare deviate is cached, so
  /// draws come in deterministic pairs.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  /// Integer in [0, n) by rejection-free modulo of a 64-bit draw; bias is
  /// negligible for the small n used here but we reject to keep exactness.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace subpop
