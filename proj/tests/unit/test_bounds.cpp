#include <doctest.h>

#include <cmath>

#include "parahom/bounds.hpp"
#include "parahom/environment.hpp"
#include "parahom/error.hpp"
#include "parahom/fit.hpp"
#include "parahom/homogenized.hpp"

using namespace parahom;

TEST_CASE("envelope fit recovers synthetic parameters") {
  const double Lam = 0.125, C = 0.7, alpha = 1.3, gamma = 0.4, base = 2.0;
  std::vector<EnvelopeSample> s;
  for (int t = 4; t <= 256; t *= 2)
    for (int r = 0; r <= 12; r += 3) {
      const double m = envelope_spatial(r, t, Lam);
      const double v = C * std::pow(Lam * t + 1.0, -0.5 * (base + alpha)) * std::exp(-gamma * m);
      s.push_back({static_cast<double>(r), static_cast<double>(t), v, 1e-3 * v});
    }
  EnvelopeForm form;
  form.Lambda = Lam;
  form.base = base;
  const auto f = envelope_fit(s, form);
  CHECK(f.C == doctest::Approx(C).epsilon(1e-6));
  CHECK(f.alpha == doctest::Approx(alpha).epsilon(1e-6));
  CHECK(f.gamma == doctest::Approx(gamma).epsilon(1e-6));
  CHECK(f.verdict == Verdict::pass);
  CHECK(f.excluded == 0);
}

TEST_CASE("envelope fit on zeros and noise is inconclusive") {
  std::vector<EnvelopeSample> zeros, noise;
  for (int t = 1; t <= 64; t *= 2) {
    zeros.push_back({0.0, static_cast<double>(t), 0.0, 0.0});
    noise.push_back({0.0, static_cast<double>(t), 1e-4, 1e-3});
  }
  EnvelopeForm form;
  const auto a = envelope_fit(zeros, form);
  CHECK(a.verdict == Verdict::inconclusive);
  CHECK(a.npoints == 0);
  const auto b = envelope_fit(noise, form);
  CHECK(b.verdict == Verdict::inconclusive);
  CHECK(b.excluded == noise.size());
  CHECK(b.noise_onset == 1.0);
}

TEST_CASE("constant environment matches the lattice reference exactly") {
  const auto spec = EnvironmentSpec::constant(2, 0.1);
  const auto box = LatticeBox::cube(2, 32);
  const double times[4] = {0, 4, 8, 16};
  const auto est = green_mc_estimate(spec, box, times, 2);
  const auto ref = HomogenizedModel::scalar(2, 0.1, HomFlavor::lattice);
  for (int order = 0; order <= 2; ++order) {
    const auto bc = green_bound_check(est, ref, order);
    CHECK(bc.max_abs_diff < 1e-14);
    CHECK(bc.fit.verdict == Verdict::inconclusive);
  }
  CHECK_THROWS_AS(green_bound_check(est, ref, 3), ConfigError);
}

TEST_CASE("exponent ladder comparison uses band overlap") {
  std::vector<BoundCheck> c(3);
  for (int k = 0; k < 3; ++k) {
    c[static_cast<std::size_t>(k)].order = k;
    c[static_cast<std::size_t>(k)].d = 1;
    c[static_cast<std::size_t>(k)].fit.band_lo = 0.8;
    c[static_cast<std::size_t>(k)].fit.band_hi = 1.2;
  }
  CHECK(ladder_nondecreasing(c));
  c[2].fit.band_lo = c[2].fit.band_hi = -2.0;
  CHECK_FALSE(ladder_nondecreasing(c));
}

TEST_CASE("rate experiment in a constant environment") {
  const auto spec = EnvironmentSpec::constant(1, 0.125);
  Profile f;
  f.width = 0.5;
  const auto model = HomogenizedModel::scalar(1, 0.125, HomFlavor::continuum);
  RateOptions opt;
  opt.eps = {0.5, 0.25, 0.125};
  opt.times = {0.25, 0.5};
  opt.N = 50;
  const auto r = rate_experiment(spec, f, model, opt);
  REQUIRE(r.E.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(r.N[k] <= 2);
    CHECK(r.E_se[k] == 0.0);
    CHECK_FALSE(r.noise_limited[k]);
  }
  CHECK(r.monotone);
  CHECK(r.fit.exponent > 1.5);
  CHECK(r.fit.exponent < 2.5);
  CHECK(r.verdict == Verdict::pass);
  const auto again = rate_experiment(spec, f, model, opt);
  CHECK(again.E == r.E);

  RateOptions bad = opt;
  bad.eps = {0.25, 0.5};
  CHECK_THROWS_AS(rate_experiment(spec, f, model, bad), ConfigError);
  bad = opt;
  bad.times = {0.3};
  CHECK_THROWS_AS(rate_experiment(spec, f, model, bad), ConfigError);
}

TEST_CASE("rate box is large enough for the kernel spread") {
  const int L = rate_box_side(1, 0.125, 0.125, 2.0, 1.0);
  CHECK((L & (L - 1)) == 0);
  CHECK(L >= 2 * 16 + 2 * static_cast<int>(std::ceil(8.5 * std::sqrt(2.0 * 0.125 * 64 + 1.0))));
}

TEST_CASE("envelope constant is stable under horizon doubling against the continuum") {
  const auto spec = EnvironmentSpec::constant(1, 0.125);
  const auto box = LatticeBox::cube(1, 512);
  const auto ref = HomogenizedModel::scalar(1, 0.125, HomFlavor::continuum);
  // The drift comes from late-time corrections to the fitted exponent, so it shrinks with the horizon.
  double prev = 1e300;
  for (int T : {512, 1024}) {
    std::vector<double> t1, t2;
    for (int t = 0; t <= T; ++t) t1.push_back(t);
    for (int t = 0; t <= 2 * T; ++t) t2.push_back(t);
    const auto e1 = green_mc_estimate(spec, box, t1, 2);
    const auto e2 = green_mc_estimate(spec, box, t2, 2);
    BoundCheckOptions opt;
    opt.t_min = T / 8;
    const auto a = green_bound_check(e1, ref, 0, opt);
    REQUIRE(a.fit.npoints >= 4);
    CHECK(a.fit.alpha == doctest::Approx(2.0).epsilon(0.1));
    CHECK(a.fit.gamma >= 0.0);
    BoundCheckOptions again = opt;
    again.alpha = a.fit.alpha;
    again.gamma = a.fit.gamma;
    const auto b = green_bound_check(e2, ref, 0, again);
    const double change = ratio_change(a, b);
    CHECK(change <= 0.1);
    CHECK(change < prev);
    prev = change;
  }
}

TEST_CASE("spatial holder probe") {
  const auto spec = EnvironmentSpec::constant(1, 0.125);
  const auto box = LatticeBox::cube(1, 256);
  std::vector<double> t1, t2;
  for (int t = 0; t <= 64; ++t) t1.push_back(t);
  for (int t = 0; t <= 128; ++t) t2.push_back(t);
  const auto e1 = green_mc_estimate(spec, box, t1, 2);
  const auto e2 = green_mc_estimate(spec, box, t2, 2);
  const auto lat = HomogenizedModel::scalar(1, 0.125, HomFlavor::lattice);
  const auto zero = holder_x_ratio(e1, lat, 0.5, 0.1, 16);
  // Only roundoff separates the estimate from its own lattice kernel.
  CHECK(zero.max_ratio < 1e-10);
  const auto cont = HomogenizedModel::scalar(1, 0.125, HomFlavor::continuum);
  const auto h1 = holder_x_ratio(e1, cont, 0.5, 0.1, 16, 8.0);
  const auto h2 = holder_x_ratio(e2, cont, 0.5, 0.1, 16, 8.0);
  CHECK(h1.pairs > 0);
  CHECK(std::isfinite(h1.max_ratio));
  CHECK(h1.max_ratio > 0.0);
  CHECK(h2.max_ratio <= 1.2 * h1.max_ratio);
  CHECK_THROWS_AS(holder_x_ratio(e1, cont, 0.0, 0.1, 16), ConfigError);
  CHECK_THROWS_AS(holder_x_ratio(e1, cont, 0.5, 0.1, 200), SizingError);
}
