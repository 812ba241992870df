#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

namespace metaland {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` derived from a base seed; streams are independent.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Deterministic random source. The distribution transforms are written out here
// instead of using <random> distributions, whose output is implementation
// defined; reports must be byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Every uniform draw returns lo + q * (hi - lo). Used to probe sampling bounds.
  static Rng pinned(double quantile) {
    Rng rng(0);
    rng.pinned_ = quantile;
    return rng;
  }

  double uniform01() {
    if (pinned_) return *pinned_;
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  bool bernoulli(double p) { return uniform01() < p; }

  double normal() {
    if (pinned_) return 0.0;
    if (spare_) {
      double s = *spare_;
      spare_.reset();
      return s;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    return radius * std::cos(angle);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> pinned_;
  std::optional<double> spare_;
};

}  // namespace metaland
