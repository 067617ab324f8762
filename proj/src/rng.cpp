#include "parahom/rng.hpp"

#include <cmath>
#include <numbers>

namespace parahom {

namespace {
constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}
}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter c, PhiloxKey k) noexcept {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

CounterRng::CounterRng(std::uint64_t seed, Purpose purpose) noexcept {
  const auto p = static_cast<std::uint32_t>(purpose);
  key_ = {static_cast<std::uint32_t>(seed) ^ (p * 0x85EBCA6Bu), static_cast<std::uint32_t>(seed >> 32)};
  // Premix the purpose so nearby seeds and purposes give unrelated keys.
  auto mixed = philox4x32_10({p, 0x243F6A88u, 0, 0}, key_);
  key_ = {mixed[0], mixed[1]};
}

PhiloxCounter CounterRng::words(std::uint64_t stream, std::int64_t time, const int* x, int d) const noexcept {
  const auto x0 = d > 0 ? static_cast<std::uint32_t>(x[0]) : 0u;
  const auto x1 = d > 1 ? static_cast<std::uint32_t>(x[1]) & 0xFFFFu : 0u;
  const auto x2 = d > 2 ? static_cast<std::uint32_t>(x[2]) & 0xFFFFu : 0u;
  const auto st = static_cast<std::uint32_t>(stream) ^ (static_cast<std::uint32_t>(stream >> 32) * 0x9E3779B1u);
  return philox4x32_10({x0, x1 | (x2 << 16), static_cast<std::uint32_t>(time), st}, key_);
}

double CounterRng::uniform(std::uint64_t stream, std::int64_t time, const int* x, int d) const noexcept {
  auto w = words(stream, time, x, d);
  return u01_open(w[0], w[1]);
}

std::pair<double, double> CounterRng::normal_pair(std::uint64_t stream, std::int64_t time, const int* x,
                                                  int d) const noexcept {
  auto w = words(stream, time, x, d);
  const double u1 = u01_open(w[0], w[1]);
  const double u2 = u01_open(w[2], w[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(th), r * std::sin(th)};
}

int CounterRng::sign(std::uint64_t stream, std::int64_t time, const int* x, int d) const noexcept {
  return (words(stream, time, x, d)[0] >> 31) ? 1 : -1;
}

}  // namespace parahom
