#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hidpop {

// Seedable, splittable source of randomness. Every sampler takes one by
// reference; two streams built from the same seed produce identical draws.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  // Independent child stream; children with distinct indices do not overlap
  // in practice because their seeds pass through SplitMix64 finalisation.
  RandomStream split(std::uint64_t index) const {
    return RandomStream(mix(seed_ ^ mix(index + 0x632be59bd9b4e019ULL)));
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      double u = std::generate_canonical<double, 53>(engine_);
      if (u > 0.0) return u;
    }
  }

  double normal() { return std_normal_(engine_); }

  // Gamma with the given shape and unit scale.
  double gamma(double shape) {
    std::gamma_distribution<double> g(shape, 1.0);
    return g(engine_);
  }

  double chi_squared(double df) { return 2.0 * gamma(0.5 * df); }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

  double student_t(double df) { return normal() / std::sqrt(chi_squared(df) / df); }

  std::mt19937_64& engine() noexcept { return engine_; }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> std_normal_{0.0, 1.0};
};

}  // namespace hidpop
