#include <doctest.h>

#include <cmath>

#include "parahom/environment.hpp"
#include "parahom/error.hpp"
#include "parahom/stats.hpp"

using namespace parahom;

namespace {

double site_scalar(const CoefficientPath& p, std::size_t t, std::size_t s) { return p.slice(t).at(s)[0]; }

LangevinSpec quadratic_spec(double a, double m) {
  LangevinSpec ls;
  ls.mass = m;
  ls.potential.a = a;
  ls.dt = 0.01;
  ls.grid_spacing = 0.5;
  return ls;
}

}  // namespace

TEST_CASE("constant environment repeats kappa on every slice") {
  const auto spec = EnvironmentSpec::constant(2, 0.1);
  const auto p = sample_constant(spec, LatticeBox::cube(2, 6), 5);
  REQUIRE(p.steps() == 5);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t s = 0; s < 36; ++s) {
      const auto m = p.slice(t).at(s);
      CHECK(m[0] == 0.1);
      CHECK(m[1] == 0.0);
      CHECK(m[3] == 0.1);
    }
}

TEST_CASE("bernoulli with gamma zero equals the constant environment") {
  const auto b = sample_iid_bernoulli(EnvironmentSpec::bernoulli(1, 0.125, 0.0, 9), LatticeBox::cube(1, 16), 4);
  const auto c = sample_constant(EnvironmentSpec::constant(1, 0.125), LatticeBox::cube(1, 16), 4);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t s = 0; s < 16; ++s) CHECK(site_scalar(b, t, s) == site_scalar(c, t, s));
}

TEST_CASE("bernoulli sites take two values with mean kappa") {
  const double kappa = 1.0 / 12.0, gamma = 0.5;
  const auto spec = EnvironmentSpec::bernoulli(1, kappa, gamma, 2024);
  const auto p = sample_iid_bernoulli(spec, LatticeBox::cube(1, 1000), 100);
  RunningStats st;
  for (std::size_t t = 0; t < 100; ++t)
    for (std::size_t s = 0; s < 1000; ++s) {
      const double v = site_scalar(p, t, s);
      const bool two_valued = v == kappa * (1.0 - gamma) || v == kappa * (1.0 + gamma);
      CHECK(two_valued);
      st.push(v);
    }
  CHECK(st.n == 100000);
  CHECK(std::abs(st.mean - kappa) <= 3.0 * st.stderr_mean());
  CHECK(std::abs(st.variance() - (gamma * kappa) * (gamma * kappa)) < 0.02 * (gamma * kappa) * (gamma * kappa));
}

TEST_CASE("sampling is deterministic in seed and stream") {
  const auto spec = EnvironmentSpec::bernoulli(2, 1.0 / 16.0, 0.5, 77);
  const auto box = LatticeBox::cube(2, 8);
  const auto a = sample_iid_bernoulli(spec, box, 6, 3);
  const auto b = sample_iid_bernoulli(spec, box, 6, 3);
  const auto c = sample_iid_bernoulli(spec, box, 6, 4);
  bool same = true, differ = false;
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t s = 0; s < box.size(); ++s) {
      same = same && site_scalar(a, t, s) == site_scalar(b, t, s);
      differ = differ || site_scalar(a, t, s) != site_scalar(c, t, s);
    }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("iid environments have no space or time autocovariance") {
  const double kappa = 0.1, gamma = 0.5;
  const auto p = sample_iid_bernoulli(EnvironmentSpec::bernoulli(1, kappa, gamma, 5), LatticeBox::cube(1, 512), 200);
  RunningStats space, time;
  for (std::size_t t = 0; t + 1 < 200; ++t)
    for (std::size_t s = 0; s < 512; ++s) {
      const double u = site_scalar(p, t, s) - kappa;
      space.push(u * (site_scalar(p, t, (s + 1) % 512) - kappa));
      time.push(u * (site_scalar(p, t + 1, s) - kappa));
    }
  CHECK(std::abs(space.mean) <= 4.0 * space.stderr_mean());
  CHECK(std::abs(time.mean) <= 4.0 * time.stderr_mean());
}

TEST_CASE("iid-general families") {
  const auto box = LatticeBox::cube(3, 12);
  SUBCASE("point mass is deterministic") {
    const auto spec = EnvironmentSpec::general(3, SiteFamily::point_mass, 0.05, 0.05, 1);
    CHECK(spec.deterministic());
    const auto p = sample_iid_general(spec, box, 2);
    for (std::size_t s = 0; s < box.size(); ++s) {
      const auto m = p.slice(1).at(s);
      CHECK(m[0] == 0.05);
      CHECK(m[4] == 0.05);
      CHECK(m[8] == 0.05);
      CHECK(m[1] == 0.0);
    }
  }
  SUBCASE("uniform scalar has the midpoint mean") {
    const auto spec = EnvironmentSpec::general(3, SiteFamily::uniform_scalar, 0.02, 0.08, 1);
    const auto p = sample_iid_general(spec, box, 20);
    RunningStats st;
    for (std::size_t t = 0; t < 20; ++t)
      for (std::size_t s = 0; s < box.size(); ++s) {
        const auto m = p.slice(t).at(s);
        CHECK(m[0] == m[4]);
        CHECK(m[0] >= 0.02);
        CHECK(m[0] <= 0.08);
        st.push(m[0]);
      }
    CHECK(std::abs(st.mean - 0.05) <= 3.0 * st.stderr_mean());
  }
  SUBCASE("uniform diagonal axes are uncorrelated") {
    const auto spec = EnvironmentSpec::general(3, SiteFamily::uniform_diagonal, 0.02, 0.08, 1);
    const auto p = sample_iid_general(spec, box, 20);
    RunningStats c01, c02, c12;
    for (std::size_t t = 0; t < 20; ++t)
      for (std::size_t s = 0; s < box.size(); ++s) {
        const auto m = p.slice(t).at(s);
        const double u0 = m[0] - 0.05, u1 = m[4] - 0.05, u2 = m[8] - 0.05;
        c01.push(u0 * u1);
        c02.push(u0 * u2);
        c12.push(u1 * u2);
      }
    CHECK(std::abs(c01.mean) <= 4.0 * c01.stderr_mean());
    CHECK(std::abs(c02.mean) <= 4.0 * c02.stderr_mean());
    CHECK(std::abs(c12.mean) <= 4.0 * c12.stderr_mean());
  }
}

TEST_CASE("environment validation") {
  CHECK_THROWS_AS(EnvironmentSpec::bernoulli(1, 0.2, 0.5, 0).validate(), StabilityError);
  CHECK_THROWS_AS(EnvironmentSpec::bernoulli(1, 0.1, 1.0, 0), ConfigError);
  CHECK_NOTHROW(EnvironmentSpec::bernoulli(1, 1.0 / 6.0, 0.5, 0).validate());
  auto bad = EnvironmentSpec::general(2, SiteFamily::point_mass, 0.05, 0.1, 0);
  bad.kappa = 0.2;
  CHECK_THROWS_AS(bad.validate(), EllipticityError);
  LangevinSpec ls = quadratic_spec(1.0, 1.0);
  ls.dt = 0.2;
  CHECK_THROWS_AS(ls.validate(1), StabilityError);
  ls = quadratic_spec(1.0, 1.0);
  ls.coeff.c1 = 2.0;
  CHECK_THROWS_AS(ls.validate(1), EllipticityError);
}

TEST_CASE("exact gibbs draw matches the spectral variance") {
  const auto ls = quadratic_spec(1.0, 1.0);
  const auto box = LatticeBox::cube(1, 16);
  const auto cov = exact_gibbs_covariance(ls, box);
  double want = 0.0;
  for (int k = 0; k < 16; ++k) want += 1.0 / (2.0 - 2.0 * std::cos(2.0 * M_PI * k / 16.0) + 1.0);
  want /= 16.0;
  CHECK(cov.variance == doctest::Approx(want).epsilon(1e-13));
  RunningStats v, z;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto phi = gibbs_initial(ls, box, 11, s);
    v.push(phi[0] * phi[0]);
    z.push(phi[0]);
  }
  CHECK(std::abs(v.mean - want) <= 3.0 * v.stderr_mean());
  CHECK(std::abs(z.mean) <= 3.0 * z.stderr_mean());
}

TEST_CASE("large mass freezes the field near zero") {
  const auto ls = quadratic_spec(1.0, 5.0);
  const auto box = LatticeBox::cube(1, 16);
  RunningStats v;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto phi = gibbs_initial(ls, box, 3, s);
    v.push(phi[3] * phi[3]);
  }
  CHECK(v.mean < 0.05);
  CHECK(std::abs(v.mean - exact_gibbs_covariance(ls, box).variance) <= 3.0 * v.stderr_mean());
}

TEST_CASE("langevin dynamics preserve the stationary law") {
  const auto ls = quadratic_spec(1.0, 1.0);
  const auto box = LatticeBox::cube(1, 16);
  const auto exact = exact_gibbs_covariance(ls, box);
  const auto em = euler_maruyama_covariance(ls, box, ls.dt);
  CHECK(em.variance > exact.variance);
  CHECK(em.variance - exact.variance < 0.015 * exact.variance);
  const auto mom = langevin_moments(ls, box, ls.dt, 400, 2.0, 2, 1.0, 8);
  CHECK(std::abs(mom.variance - em.variance) <= 3.5 * mom.variance_se);
  CHECK(std::abs(mom.lag1 - em.lag1) <= 3.5 * mom.lag1_se);
  const auto again = langevin_moments(ls, box, ls.dt, 400, 2.0, 2, 1.0, 8);
  CHECK(again.variance == mom.variance);
}

TEST_CASE("langevin coefficients stay inside the map bounds") {
  auto ls = quadratic_spec(1.0, 1.0);
  ls.coeff = {0.1, 1.0, 0.5};
  ls.potential.kind = PotentialKind::convex_sqrt;
  ls.potential.eps = 0.5;
  ls.burn_in = 1.0;
  const auto spec = EnvironmentSpec::langevin_field(1, ls, 4);
  CHECK_NOTHROW(spec.validate());
  const auto p = sample_path(spec, LatticeBox::cube(1, 16), 3.0, 0);
  CHECK(p.continuous);
  CHECK(p.step == 0.5);
  CHECK(p.steps() == 6);
  for (std::size_t t = 0; t < p.steps(); ++t)
    for (std::size_t s = 0; s < 16; ++s) {
      const double v = site_scalar(p, t, s);
      CHECK(v >= 0.05);
      CHECK(v <= 0.15);
    }
}
