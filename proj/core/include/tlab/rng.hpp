#pragma once

#include <cmath>
#include <cstdint>

namespace tlab {

/**
 * Deterministic, cross-platform pseudo-random number generator.
 *
 * Uses the splitmix64 scrambler for uniform 64-bit output and Box–Muller for
 * gaussians. The standard library's mt19937 + normal_distribution pair is not
 * bit-identical across implementations, which would break the byte-for-byte
 * trace reproducibility this project guarantees, so the generator is
 * self-contained.
 *
 * substream(id) derives an independent generator keyed on (master seed, id) so
 * that consumers — measurement noise, actuation noise, attacker sampling,
 * calibration — cannot perturb each other's draw sequences when one of them
 * changes how many numbers it consumes.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed), seed_(seed) {}

  /// Next raw 64-bit value (splitmix64).
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal deviate (Box–Muller, spare cached).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Independent generator derived from the *original* seed and a stream id.
  Rng substream(std::uint64_t id) const { return Rng(mix(seed_, id)); }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t s, std::uint64_t id) {
    // Feed (seed, id) through two splitmix64 rounds so that nearby ids map to
    // well-separated states.
    std::uint64_t z = s ^ (0x9E3779B97F4A7C15ULL * (id + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    z = (z + 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tlab
