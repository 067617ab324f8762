#include <doctest.h>

#include <cmath>
#include <random>

#include "parahom/lattice.hpp"

using namespace parahom;

namespace {

ScalarField random_field(const LatticeBox& box, std::mt19937_64& g) {
  std::normal_distribution<double> n;
  ScalarField f(box);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = n(g);
  return f;
}

VectorField random_vector(const LatticeBox& box, std::mt19937_64& g) {
  std::normal_distribution<double> n;
  VectorField v(box);
  for (auto& x : v.values()) x = n(g);
  return v;
}

}  // namespace

TEST_CASE("box indexing wraps and round-trips") {
  LatticeBox box({4, 6, 5});
  std::vector<int> c(3);
  for (std::size_t i = 0; i < box.size(); ++i) {
    box.coords(i, c);
    CHECK(box.index(c) == i);
    for (int a = 0; a < 3; ++a) {
      CHECK(box.minus(box.plus(i, a), a) == i);
      std::vector<int> up = c;
      up[static_cast<std::size_t>(a)] += 1;
      CHECK(box.plus(i, a) == box.index(up));
    }
  }
  const int far[3] = {-4, 13, -1};
  const int near[3] = {0, 1, 4};
  CHECK(box.index(far) == box.index(near));
  LatticeBox line({8});
  std::vector<int> x(1);
  for (std::size_t i = 0; i < 8; ++i) {
    line.centered_coords(i, x);
    CHECK(x[0] >= -4);
    CHECK(x[0] < 4);
  }
  CHECK_THROWS_AS(LatticeBox({1}), DimensionError);
  CHECK_THROWS_AS(LatticeBox({4, 4, 4, 4}), DimensionError);
}

TEST_CASE("gradient examples") {
  LatticeBox box({4});
  ScalarField f(box, {0, 1, 2, 3});
  const auto g = gradient(f);
  CHECK(g.values()[0] == 1.0);
  CHECK(g.values()[1] == 1.0);
  CHECK(g.values()[2] == 1.0);
  CHECK(g.values()[3] == -3.0);

  LatticeBox b2({5, 7});
  ScalarField c(b2, std::vector<double>(b2.size(), 7.0));
  const auto gc = gradient(c);
  for (double v : gc.values()) CHECK(v == 0.0);

  LatticeBox b8({8});
  ScalarField delta(b8);
  delta[0] = 1.0;
  const auto gd = gradient(delta);
  for (std::size_t i = 0; i < 8; ++i) {
    const bool support = i == 0 || i == 7;  // x = 0 and x = -1
    CHECK((gd.values()[i] != 0.0) == support);
  }
}

TEST_CASE("divergence examples and summation by parts") {
  LatticeBox box({8});
  ScalarField delta(box);
  delta[0] = 1.0;
  const auto lap = divergence(gradient(delta));
  CHECK(lap[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(lap[1] == -1.0);
  CHECK(lap[7] == -1.0);

  LatticeBox b2({6, 4});
  VectorField v(b2);
  for (std::size_t i = 0; i < b2.size(); ++i) {
    v.component(0)[i] = 3.0;
    v.component(1)[i] = -2.0;
  }
  const auto dv = divergence(v);
  for (double x : dv.values()) CHECK(x == 0.0);

  std::mt19937_64 g(7);
  for (int rep = 0; rep < 5; ++rep) {
    const auto w = random_vector(b2, g);
    double s = 0.0, scale = 0.0;
    const auto dw = divergence(w);
    for (double x : dw.values()) s += x;
    for (double x : w.values()) scale += std::abs(x);
    CHECK(std::abs(s) <= 1e-12 * scale);
  }
}

TEST_CASE("gradient and divergence are adjoint") {
  std::mt19937_64 g(11);
  LatticeBox box({8, 8});
  for (int rep = 0; rep < 10; ++rep) {
    const auto f = random_field(box, g);
    const auto v = random_vector(box, g);
    const auto gf = gradient(f);
    const auto dv = divergence(v);
    const double lhs = inner<double>(gf.values(), v.values());
    const double rhs = inner<double>(f.values(), dv.values());
    const double nf = std::sqrt(inner<double>(f.values(), f.values()));
    const double nv = std::sqrt(inner<double>(v.values(), v.values()));
    CHECK(std::abs(lhs - rhs) < 1e-12 * nf * nv);
  }
}

TEST_CASE("divergence-form operator examples") {
  const double kappa = 0.125;
  LatticeBox box({9});
  EllipticityBounds b(kappa, kappa, 1);
  const auto a = CoefficientSlice::constant(box, kappa, b);
  ScalarField delta(box);
  delta[0] = 1.0;
  const auto out = apply_divergence_form(a, delta);
  CHECK(out[0] == doctest::Approx(2.0 * kappa).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(-kappa).epsilon(1e-15));
  CHECK(out[8] == doctest::Approx(-kappa).epsilon(1e-15));
  ScalarField c(box, std::vector<double>(box.size(), 3.5));
  const auto ac = apply_divergence_form(a, c);
  for (double v : ac.values()) CHECK(v == 0.0);

  std::mt19937_64 g(3);
  LatticeBox b2({6, 5});
  EllipticityBounds bb(0.05, 0.05, 2);
  const auto a2 = CoefficientSlice::constant(b2, 0.05, bb);
  const auto u = random_field(b2, g);
  const auto lhs = apply_divergence_form(a2, u);
  const auto rhs = divergence(gradient(u));
  for (std::size_t i = 0; i < b2.size(); ++i) CHECK(lhs[i] == doctest::Approx(0.05 * rhs[i]).epsilon(1e-13));
}

TEST_CASE("divergence-form operator conserves mass for matrix coefficients") {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> U(-0.02, 0.02);
  LatticeBox box({5, 6});
  EllipticityBounds b(0.02, 0.12, 2);
  std::vector<double> vals;
  for (std::size_t s = 0; s < box.size(); ++s) {
    const double off = U(g);
    vals.insert(vals.end(), {0.07 + U(g), off, off, 0.07 + U(g)});
  }
  CoefficientSlice a(box, vals, b);
  CHECK_FALSE(a.is_scalar());
  const auto u = random_field(box, g);
  const auto out = apply_divergence_form(a, u);
  double s = 0.0;
  for (double v : out.values()) s += v;
  CHECK(std::abs(s) < 1e-14);
  const auto ref = serial::apply_divergence_form(a, u);
  for (std::size_t i = 0; i < box.size(); ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-14));
}

TEST_CASE("parallel kernels agree with the serial reference") {
  std::mt19937_64 g(9);
  for (auto sides : {std::vector<int>{16}, std::vector<int>{8, 6}, std::vector<int>{4, 5, 6}}) {
    LatticeBox box(sides);
    const auto f = random_field(box, g);
    const auto v = random_vector(box, g);
    const auto g1 = gradient(f), g2 = serial::gradient(f);
    for (std::size_t i = 0; i < g1.values().size(); ++i) CHECK(g1.values()[i] == g2.values()[i]);
    const auto d1 = divergence(v), d2 = serial::divergence(v);
    for (std::size_t i = 0; i < box.size(); ++i) CHECK(d1[i] == d2[i]);
    const int d = box.dim();
    EllipticityBounds b(0.01, 1.0 / (4.0 * d), d);
    std::uniform_real_distribution<double> U(0.01, 1.0 / (4.0 * d));
    std::vector<double> s(box.size());
    for (auto& x : s) x = U(g);
    const auto a = CoefficientSlice::scalar(box, s, b);
    const auto o1 = apply_divergence_form(a, f), o2 = serial::apply_divergence_form(a, f);
    for (std::size_t i = 0; i < box.size(); ++i) CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-14));
  }
}

TEST_CASE("explicit step keeps nonnegative data nonnegative") {
  std::mt19937_64 g(13);
  LatticeBox box({7, 7});
  EllipticityBounds b(0.01, 0.125, 2);
  std::uniform_real_distribution<double> U(0.01, 0.125);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> s(box.size());
    for (auto& x : s) x = U(g);
    const auto a = CoefficientSlice::scalar(box, s, b);
    std::vector<double> u(box.size()), out(box.size()), scratch(2 * box.size());
    for (auto& x : u) x = U(g) < 0.05 ? 0.0 : U(g);
    step_divergence_form(a, u, out, scratch);
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      CHECK(out[i] >= 0.0);
      m0 += u[i];
      m1 += out[i];
    }
    CHECK(std::abs(m1 - m0) <= 1e-12 * m0);
  }
}

TEST_CASE("coefficient slices reject invalid input") {
  LatticeBox box({4, 4});
  EllipticityBounds b(0.05, 0.1, 2);
  std::vector<double> asym;
  for (std::size_t s = 0; s < box.size(); ++s) asym.insert(asym.end(), {0.07, 0.01, 0.0, 0.07});
  CHECK_THROWS_AS(CoefficientSlice(box, asym, b), EllipticityError);
  std::vector<double> big(box.size(), 0.2);
  CHECK_THROWS_AS(CoefficientSlice::scalar(box, big, b), EllipticityError);
  std::vector<double> nan(box.size(), std::nan(""));
  CHECK_THROWS(CoefficientSlice::scalar(box, nan, b));
  CHECK_THROWS_AS(EllipticityBounds(0.1, 0.3, 1).require_discrete_stable(), StabilityError);
  CHECK(EllipticityBounds(0.1, 0.25, 1).discrete_stable());
  const double m[4] = {2.0, 1.0, 1.0, 2.0};
  const auto [lo, hi] = symmetric_eigen_range(m, 2);
  CHECK(lo == doctest::Approx(1.0));
  CHECK(hi == doctest::Approx(3.0));
}
