#pragma once

// Portable seeded randomness. std::mt19937_64 and std::seed_seq have
// standard-mandated output; the distributions below replace the
// implementation-defined std:: ones so streams match across toolchains.

#include <cstdint>
#include <random>

namespace bandperm {

class Rng {
 public:
  using engine_type = std::mt19937_64;

  /// Stream `stream` of seed `seed`. Chain k of a sweep uses stream k; the
  /// engine is keyed by the four 32-bit halves of (seed, stream).
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, bound), Lemire's multiply-and-reject.
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        x = next();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  engine_type engine_;
};

}  // namespace bandperm
