#pragma once

#include <cmath>
#include <cstdint>

namespace asmpc {

// Counter-based splittable RNG. Each draw hashes (key, counter), so streams
// derived via split() are independent of draw order and runs are reproducible
// regardless of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed + 0x9E3779B97F4A7C15ULL) ^ mix(stream + 0xBF58476D1CE4E5B9ULL))) {}

  // Child stream; disjoint from the parent and from other substreams.
  [[nodiscard]] RngStream split(std::uint64_t substream) const {
    RngStream child(0);
    child.key_ = mix(key_ ^ mix(substream + 0x94D049BB133111EBULL));
    return child;
  }

  std::uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [-bound, bound].
  double uniform_symmetric(double bound) { return bound * (2.0 * uniform() - 1.0); }

  // Standard normal via Box-Muller (one value per pair of uniforms).
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace asmpc
