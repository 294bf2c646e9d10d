#pragma once

// Counter-based normal variates.
//
// Every Gaussian drawn anywhere in the library is a pure function of
// (seed, replica, stream, index), so serial and parallel runs agree bit for
// bit and any single mode can be regenerated without replaying a sequence.
// The block cipher is Philox4x32-10 (Salmon et al., SC'11); normals come
// from the Box-Muller transform applied to two 53-bit uniforms.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace thick {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo32(kM0, ctr[0], hi0, lo0);
    mulhilo32(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

inline double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
  // 53-bit uniform in (0, 1]; never zero so log() below is finite.
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

}  // namespace detail

/// Independent standard-normal stream identified by (seed, replica, stream).
/// `pair(i)` returns two independent N(0,1) values for counter i.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t replica, std::uint32_t stream) : stream_(stream) {
    const std::uint64_t k = detail::splitmix64(seed ^ detail::splitmix64(replica + 0x632BE59BD9B4E019ULL));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  std::pair<double, double> pair(std::uint64_t index) const {
    const auto r = detail::philox4x32_10(
        {stream_, static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5EEDu}, key_);
    const double u1 = detail::to_unit_open(r[0], r[1]);
    const double u2 = detail::to_unit_open(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  /// Single variate: the first component of pair(index / 2) or the second.
  double at(std::uint64_t index) const {
    const auto p = pair(index >> 1);
    return (index & 1u) ? p.second : p.first;
  }

 private:
  std::array<std::uint32_t, 2> key_{};
  std::uint32_t stream_;
};

}  // namespace thick
