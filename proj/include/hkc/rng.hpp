#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hkc {

/// SplitMix64 finalizer; used to derive decorrelated stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based seed split: folds each counter into the base seed through
/// splitmix64, so stream (seed, a, b) is a pure function of its arguments.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) noexcept;

/// Seeded random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. All variate transforms are implemented here rather than taken
/// from <random> distributions, which are implementation-defined, so a seed
/// reproduces the same numbers on every conforming toolchain.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Independent child stream identified by counters.
  static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
    return RngStream(derive_seed(seed, counters));
  }

  /// Uniform on the open interval (0,1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() noexcept;
  double exponential() noexcept;
  /// Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape) noexcept;
  double chi_square(double dof) noexcept { return 2.0 * gamma(0.5 * dof); }

  std::uint64_t next_u64() noexcept { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hkc
