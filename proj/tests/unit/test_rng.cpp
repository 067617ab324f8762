#include <doctest.h>

#include <cmath>

#include "parahom/rng.hpp"
#include "parahom/stats.hpp"

using namespace parahom;

TEST_CASE("philox4x32-10 known-answer vectors") {
  const auto a = philox4x32_10({0, 0, 0, 0}, {0, 0});
  CHECK(a == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  const auto b = philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
  CHECK(b == PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  const auto c = philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  CHECK(c == PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter rng is a pure function of its address") {
  const CounterRng r(42, Purpose::test), r2(42, Purpose::test), other(43, Purpose::test);
  const CounterRng purpose(42, Purpose::bernoulli);
  const int x[2] = {3, -5};
  CHECK(r.words(7, 11, x, 2) == r2.words(7, 11, x, 2));
  CHECK(r.words(7, 11, x, 2) != other.words(7, 11, x, 2));
  CHECK(r.words(7, 11, x, 2) != purpose.words(7, 11, x, 2));
  CHECK(r.words(7, 11, x, 2) != r.words(8, 11, x, 2));
  CHECK(r.words(7, 11, x, 2) != r.words(7, 12, x, 2));
  const int y[2] = {3, -4};
  CHECK(r.words(7, 11, x, 2) != r.words(7, 11, y, 2));
}

TEST_CASE("uniform, normal and sign draws have the right moments") {
  const CounterRng r(2024, Purpose::test);
  RunningStats u, n, s;
  for (int i = 0; i < 100000; ++i) {
    const int x[1] = {i};
    const double v = r.uniform(0, 0, x, 1);
    CHECK(v > 0.0);
    CHECK(v < 1.0);
    u.push(v);
    const auto [z1, z2] = r.normal_pair(0, 1, x, 1);
    n.push(z1);
    n.push(z2);
    s.push(r.sign(0, 2, x, 1));
  }
  CHECK(std::abs(u.mean - 0.5) < 4.0 * u.stderr_mean());
  CHECK(std::abs(u.variance() - 1.0 / 12.0) < 0.002);
  CHECK(std::abs(n.mean) < 4.0 * n.stderr_mean());
  CHECK(std::abs(n.variance() - 1.0) < 0.02);
  CHECK(std::abs(s.mean) < 4.0 * s.stderr_mean());
  CHECK(u01_open(0, 0) > 0.0);
  CHECK(u01_open(0xffffffff, 0xffffffff) < 1.0);
}
