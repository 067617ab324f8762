#include <doctest.h>

#include <cmath>

#include "parahom/heat_kernel.hpp"

using namespace parahom;

TEST_CASE("one-step discrete kernel by hand") {
  LatticeBox box({64});
  const auto tab = discrete_kernel(1, 0.25, box, 4);
  const int o[1] = {0}, p[1] = {1}, m[1] = {-1}, q[1] = {2};
  CHECK(tab.at(o, 0) == 1.0);
  CHECK(tab.at(p, 0) == 0.0);
  CHECK(tab.at(o, 1) == 0.5);
  CHECK(tab.at(p, 1) == 0.25);
  CHECK(tab.at(m, 1) == 0.25);
  CHECK(tab.at(q, 1) == 0.0);
}

TEST_CASE("discrete kernel conserves mass, stays nonnegative and is symmetric") {
  for (int d = 1; d <= 3; ++d) {
    const double Lambda = 1.0 / (4.0 * d);
    const int T = d == 3 ? 24 : 64;
    const int side = kernel_box_side(d, Lambda, T);
    const auto box = LatticeBox::cube(d, side);
    const auto tab = discrete_kernel(d, Lambda, box, T);
    for (double m : tab.total_mass) CHECK(std::abs(m - 1.0) <= 1e-12);
    for (double v : tab.values) CHECK(v >= 0.0);
    std::vector<int> x(static_cast<std::size_t>(d)), y(x.size());
    for (std::size_t ti = 0; ti < tab.times.size(); ti += 7) {
      for (std::size_t w = 0; w < tab.window_size(); ++w) {
        tab.window_coords(w, x);
        for (std::size_t a = 0; a < x.size(); ++a) y[a] = -x[a];
        CHECK(tab.at(x, ti) == tab.at(y, ti));
        if (d >= 2) {
          y = x;
          std::swap(y[0], y[1]);
          CHECK(tab.at(x, ti) == tab.at(y, ti));
        }
      }
    }
    std::vector<int> o(static_cast<std::size_t>(d), 0);
    CHECK(tab.at(o, 0) == 1.0);
    CHECK(tab.boundary_mass < kBoundaryMassThreshold);
  }
}

TEST_CASE("discrete kernel rejects unstable Lambda and undersized boxes") {
  CHECK_THROWS_AS(discrete_kernel(1, 0.3, LatticeBox({64}), 4), StabilityError);
  CHECK_THROWS_AS(discrete_kernel(1, 0.25, LatticeBox({16}), 200), SizingError);
  CHECK_THROWS_AS(discrete_kernel(2, 0.1, LatticeBox({64}), 4), DimensionError);
}

TEST_CASE("serial and parallel discrete kernels are bitwise equal") {
  const auto box = LatticeBox::cube(2, 64);
  const auto a = discrete_kernel(2, 0.125, box, 40);
  const auto b = serial::discrete_kernel(2, 0.125, box, 40);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("continuous kernel: delta at zero, unit mass, matches a fine ODE integration") {
  const double Lambda = 0.25;
  LatticeBox box({64});
  const std::vector<double> times{0.0, 0.5, 1.0, 2.5, 5.0};
  const auto tab = continuous_kernel(1, Lambda, box, times);
  const int o[1] = {0}, p[1] = {1};
  CHECK(tab.at(o, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(tab.at(p, 0)) < 1e-14);
  for (double m : tab.total_mass) CHECK(std::abs(m - 1.0) <= 1e-12);

  // RK4 for dG/dt = -Λ∇*∇G with step 1e-3.
  std::vector<double> g(64, 0.0);
  g[0] = 1.0;
  auto rhs = [&](const std::vector<double>& u) {
    std::vector<double> r(64);
    for (int i = 0; i < 64; ++i) r[static_cast<std::size_t>(i)] = Lambda * (u[static_cast<std::size_t>((i + 1) % 64)] + u[static_cast<std::size_t>((i + 63) % 64)] - 2.0 * u[static_cast<std::size_t>(i)]);
    return r;
  };
  const double h = 1e-3;
  double t = 0.0;
  std::size_t next = 1;
  while (next < times.size()) {
    auto k1 = rhs(g);
    std::vector<double> tmp(64);
    for (int i = 0; i < 64; ++i) tmp[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i)] + 0.5 * h * k1[static_cast<std::size_t>(i)];
    auto k2 = rhs(tmp);
    for (int i = 0; i < 64; ++i) tmp[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i)] + 0.5 * h * k2[static_cast<std::size_t>(i)];
    auto k3 = rhs(tmp);
    for (int i = 0; i < 64; ++i) tmp[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i)] + h * k3[static_cast<std::size_t>(i)];
    auto k4 = rhs(tmp);
    for (std::size_t i = 0; i < 64; ++i) g[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    t += h;
    if (std::abs(t - times[next]) < 1e-9) {
      CHECK(std::abs(g[0] - tab.at(o, next)) < 1e-8);
      ++next;
    }
  }
}

TEST_CASE("discrete kernel approaches the continuous kernel as time grows") {
  const double Lambda = 0.125;
  const int T = 256;
  LatticeBox box({kernel_box_side(1, Lambda, T)});
  const auto disc = discrete_kernel(1, Lambda, box, T);
  const std::vector<double> times{16.0, 64.0, 256.0};
  const auto cont = continuous_kernel(1, Lambda, box, times, disc.radius);
  std::vector<double> worst;
  std::vector<int> x(1);
  for (std::size_t k = 0; k < times.size(); ++k) {
    double m = 0.0;
    for (std::size_t w = 0; w < cont.window_size(); ++w) {
      cont.window_coords(w, x);
      m = std::max(m, std::abs(disc.at(x, static_cast<std::size_t>(times[k])) - cont.at(x, k)));
    }
    worst.push_back(m);
  }
  CHECK(worst[1] < worst[0]);
  CHECK(worst[2] < worst[1]);
}

TEST_CASE("envelope check: origin slope near -d/2 and constant stable under horizon doubling") {
  for (int d = 1; d <= 2; ++d) {
    const double Lambda = 0.125;
    const int T = 256;
    const auto box = LatticeBox::cube(d, kernel_box_side(d, Lambda, 2 * T));
    const auto a = envelope_check(discrete_kernel(d, Lambda, box, T), 8.0);
    const auto b = envelope_check(discrete_kernel(d, Lambda, box, 2 * T), 8.0);
    CHECK(a.alpha >= -0.5 * d - 0.05);
    CHECK(a.alpha <= -0.5 * d + 0.05);
    CHECK(std::isfinite(a.C));
    CHECK(std::abs(b.C / a.C - 1.0) <= 0.1);
  }
}
