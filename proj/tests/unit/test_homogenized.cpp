#include <doctest.h>

#include <cmath>

#include "parahom/environment.hpp"
#include "parahom/error.hpp"
#include "parahom/heat_kernel.hpp"
#include "parahom/homogenized.hpp"
#include "parahom/parabolic.hpp"

using namespace parahom;

TEST_CASE("homogenized model validation") {
  CHECK_THROWS_AS(HomogenizedModel::make(2, {1.0, 0.2, 0.3, 1.0}, HomFlavor::continuum), EllipticityError);
  CHECK_THROWS_AS(HomogenizedModel::make(2, {1.0, 2.0, 2.0, 1.0}, HomFlavor::continuum), EllipticityError);
  const auto m = HomogenizedModel::make(2, {0.1, 0.02, 0.02, 0.05}, HomFlavor::lattice);
  const auto [lo, hi] = m.eigen_range();
  CHECK(lo > 0.0);
  CHECK(lo + hi == doctest::Approx(0.15).epsilon(1e-14));
  const double xi[2] = {1.0, 2.0};
  CHECK(m.quad(xi) == doctest::Approx(0.1 + 0.08 + 0.2).epsilon(1e-14));
}

TEST_CASE("lattice green table matches the heat kernel") {
  const auto box = LatticeBox::cube(2, 32);
  const auto m = HomogenizedModel::scalar(2, 0.1, HomFlavor::lattice);
  const int times[3] = {0, 5, 15};
  const auto tab = lattice_hom_green_table(m, box, times);
  const auto K = discrete_kernel(2, 0.1, box, 15, 10);
  std::vector<int> x(2);
  double err = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    double mass = 0.0;
    for (double v : tab.record(k)) mass += v;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t w = 0; w < K.window_size(); ++w) {
      K.window_coords(w, x);
      err = std::max(err, std::abs(tab.at(x, k) - K.at(x, static_cast<std::size_t>(times[k]))));
    }
  }
  CHECK(err < 1e-12);
  const int p[2] = {2, -1};
  CHECK(lattice_hom_green(m, box, p, 5) == doctest::Approx(tab.at(p, 1)).epsilon(1e-11));
}

TEST_CASE("lattice green table with an anisotropic matrix matches time stepping") {
  const auto box = LatticeBox::cube(2, 24);
  const std::vector<double> a{0.08, 0.0, 0.0, 0.04};
  const auto m = HomogenizedModel::make(2, a, HomFlavor::lattice);
  const int times[1] = {12};
  const auto tab = lattice_hom_green_table(m, box, times);
  std::vector<double> vals(box.size() * 4, 0.0);
  for (std::size_t s = 0; s < box.size(); ++s) {
    vals[s * 4] = 0.08;
    vals[s * 4 + 3] = 0.04;
  }
  const CoefficientSlice slice(box, vals, EllipticityBounds(0.04, 0.08, 2));
  ScalarField u(box);
  u[0] = 1.0;
  for (int t = 0; t < 12; ++t) u = step_discrete(u, slice);
  double err = 0.0;
  for (std::size_t s = 0; s < box.size(); ++s) err = std::max(err, std::abs(u[s] - tab.record(0)[s]));
  CHECK(err < 1e-10);
  const auto unstable = HomogenizedModel::scalar(2, 0.3, HomFlavor::lattice);
  CHECK_THROWS_AS(lattice_hom_green_table(unstable, box, times), StabilityError);
}

TEST_CASE("continuum green function normalization and scaling") {
  const auto m = HomogenizedModel::scalar(1, 0.125, HomFlavor::continuum);
  double mass = 0.0;
  const double h = 0.01;
  for (int i = -4000; i <= 4000; ++i) {
    const double x[1] = {i * h};
    mass += h * continuum_green(m, x, 3.0);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  const double x[1] = {1.3};
  const double lam = 2.0;
  const double xs[1] = {lam * 1.3};
  CHECK(continuum_green(m, xs, lam * lam * 3.0) == doctest::Approx(continuum_green(m, x, 3.0) / lam).epsilon(1e-13));
  const auto m2 = HomogenizedModel::make(2, {0.1, 0.0, 0.0, 0.05}, HomFlavor::continuum);
  const auto a1 = HomogenizedModel::scalar(1, 0.1, HomFlavor::continuum);
  const auto a2 = HomogenizedModel::scalar(1, 0.05, HomFlavor::continuum);
  const double y[2] = {0.7, -1.1}, y0[1] = {0.7}, y1[1] = {-1.1};
  CHECK(continuum_green(m2, y, 2.0) ==
        doctest::Approx(continuum_green(a1, y0, 2.0) * continuum_green(a2, y1, 2.0)).epsilon(1e-13));
}

TEST_CASE("homogenized solution for gaussian data has a closed form") {
  Profile f;
  f.kind = ProfileKind::gaussian;
  f.width = 0.5;
  f.amplitude = 1.5;
  for (int d = 1; d <= 2; ++d) {
    const auto m = HomogenizedModel::scalar(d, 0.125, HomFlavor::continuum);
    std::vector<std::vector<double>> pts{std::vector<double>(static_cast<std::size_t>(d), 0.0),
                                         std::vector<double>(static_cast<std::size_t>(d), 0.4)};
    pts[1][0] = -0.9;
    for (double t : {0.0, 0.25, 1.0}) {
      const auto u = u_hom(m, f, pts, t, 1e-10);
      const double s2 = f.width * f.width + 2.0 * 0.125 * t;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        double r2 = 0.0;
        for (double z : pts[i]) r2 += z * z;
        const double want = f.amplitude * std::pow(f.width * f.width / s2, 0.5 * d) * std::exp(-r2 / (2.0 * s2));
        CHECK(std::abs(u[i].value - want) < 1e-8);
        if (t == 0.0) CHECK(std::abs(u[i].value - f.value(pts[i])) < 1e-8);
      }
    }
  }
}

TEST_CASE("homogenized solution peak is nonincreasing in time") {
  Profile f;
  f.kind = ProfileKind::compact_bump;
  f.width = 1.0;
  const auto m = HomogenizedModel::make(2, {0.1, 0.01, 0.01, 0.06}, HomFlavor::continuum);
  const double origin[2] = {0.0, 0.0};
  double prev = 1e300;
  for (double t : {0.0, 0.5, 1.0, 2.0}) {
    const auto v = u_hom(m, f, origin, t, 1e-9);
    CHECK(v.value <= prev + 1e-9);
    prev = v.value;
  }
}

TEST_CASE("contour identity reproduces the lattice power") {
  const double xi1[1] = {1.0};
  const auto a = identity_check_P2(0.125, xi1, 1.0, 0.25, 0.1);
  CHECK(a.residual < 1e-6);
  CHECK(std::abs(a.lhs_im) < 1e-8);
  const double xi0[1] = {0.0};
  const auto b = identity_check_P2(0.125, xi0, 1.0, 0.25, 0.1);
  CHECK(std::abs(b.lhs_re - 1.0) < 1e-10);
  const double xi2[2] = {0.5, -1.5};
  const auto c = identity_check_P2(0.1, xi2, 0.5, 0.125, 0.05);
  CHECK(c.residual < 1e-6);
  REQUIRE(c.residuals.size() >= 2);
  CHECK(c.residuals.back() <= c.residuals.front());
  CHECK(c.panel_counts.back() == c.panels);
}

TEST_CASE("lattice green function approaches the continuum one") {
  const auto m = HomogenizedModel::scalar(1, 0.125, HomFlavor::lattice);
  const auto r = lattice_vs_continuum(m, 16, 256);
  CHECK(r.times.size() == 241);
  for (int k = 0; k < 3; ++k) {
    CHECK(r.order[k].npoints == 241);
    CHECK(r.order[k].alpha >= r.threshold[k]);
  }
  CHECK(r.order[1].alpha > r.order[0].alpha);
  // At the origin the first difference gains a half power by parity, so orders 1 and 2 share the
  // asymptotic exponent 5/2; order 2 approaches it from below.
  const auto late = lattice_vs_continuum(m, 1024, 4096);
  CHECK(late.order[0].alpha == doctest::Approx(1.5).epsilon(0.01));
  CHECK(late.order[1].alpha == doctest::Approx(2.5).epsilon(0.01));
  CHECK(late.order[2].alpha == doctest::Approx(2.5).epsilon(0.01));
  CHECK(late.order[2].alpha > r.order[2].alpha);
  CHECK_THROWS_AS(lattice_vs_continuum(m, 20, 25), FitError);
}
