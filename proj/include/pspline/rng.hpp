#pragma once

#include <cstdint>

namespace pspline {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: draw i of stream (seed, replication, purpose) is
/// mix64(key + i * gamma). Streams can be created in any order on any thread
/// and always yield the same values.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  CounterRng(std::uint64_t seed, std::uint64_t replication, std::uint64_t purpose = 0) noexcept
      : key_(mix64(mix64(seed ^ 0x6a09e667f3bcc908ULL) ^ mix64(replication + kGamma)) ^
             mix64(purpose * 0x3c6ef372fe94f82bULL + 1)) {}

  std::uint64_t next() noexcept { return mix64(key_ + (++counter_) * kGamma); }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform on (a, b).
  double uniform(double a, double b) noexcept { return a + (b - a) * uniform(); }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace pspline
