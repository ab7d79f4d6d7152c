#pragma once

#include <cstdint>
#include <limits>

namespace riskmmse {

/// SplitMix64 stream keyed by (seed, counter). Each sample index gets its own
/// independent stream, so draws do not depend on evaluation order.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t counter) noexcept {
    state_ = mix(seed + 0x9E3779B97F4A7C15ULL);
    state_ = mix(state_ ^ (counter * 0xD1B54A32D192ED03ULL + 0x94D049BB133111EBULL));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace riskmmse
