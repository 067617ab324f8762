#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace parahom {

// Philox4x32-10 (Salmon et al.): stateless, keyed counter-to-random bijection.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept;

// Draw purposes keep independent uses of the same (site, time, stream) apart.
enum class Purpose : std::uint32_t {
  bernoulli = 1,
  general_site = 2,
  general_site_extra = 5,
  langevin_noise = 3,
  gibbs_noise = 4,
  test = 99,
};

// Randomness addressed by (seed, purpose, stream, time, site coordinates).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Purpose purpose) noexcept;

  // Four 32-bit words for one address. Coordinates are taken modulo 2^16 on axes 1, 2.
  PhiloxCounter words(std::uint64_t stream, std::int64_t time, const int* x, int d) const noexcept;

  double uniform(std::uint64_t stream, std::int64_t time, const int* x, int d) const noexcept;
  // Two independent standard normals (Box-Muller on 4 words).
  std::pair<double, double> normal_pair(std::uint64_t stream, std::int64_t time, const int* x,
                                        int d) const noexcept;
  // +1 or -1 with probability 1/2.
  int sign(std::uint64_t stream, std::int64_t time, const int* x, int d) const noexcept;

 private:
  PhiloxKey key_;
};

// Uniform in (0,1) from the top 52 bits, never exactly 0 or 1.
inline double u01_open(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t v = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 12;
  return (static_cast<double>(v) + 0.5) * 0x1.0p-52;
}

}  // namespace parahom
