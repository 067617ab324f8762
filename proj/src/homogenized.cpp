#include "parahom/homogenized.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "parahom/error.hpp"
#include "parahom/fft.hpp"
#include "parahom/heat_kernel.hpp"

namespace parahom {

const char* to_string(HomFlavor f) noexcept { return f == HomFlavor::lattice ? "lattice" : "continuum"; }

namespace {

Eigen::MatrixXd as_matrix(const HomogenizedModel& m) {
  Eigen::MatrixXd A(m.d, m.d);
  for (int i = 0; i < m.d; ++i)
    for (int j = 0; j < m.d; ++j) A(i, j) = m.a[static_cast<std::size_t>(i * m.d + j)];
  return A;
}

}  // namespace

HomogenizedModel HomogenizedModel::make(int d, std::vector<double> a, HomFlavor flavor) {
  if (d < 1 || d > 3) throw DimensionError("homogenized model: d must be 1, 2 or 3");
  if (a.size() != static_cast<std::size_t>(d * d)) throw DimensionError("homogenized model: a must be d x d");
  for (double v : a)
    if (!std::isfinite(v)) throw EllipticityError("homogenized model: non-finite entry");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < i; ++j)
      if (std::abs(a[static_cast<std::size_t>(i * d + j)] - a[static_cast<std::size_t>(j * d + i)]) > 1e-10)
        throw EllipticityError("homogenized model: a is not symmetric");
  HomogenizedModel m;
  m.d = d;
  m.a = std::move(a);
  m.flavor = flavor;
  if (!(m.eigen_range().first > 0.0)) throw EllipticityError("homogenized model: a is not positive definite");
  return m;
}

HomogenizedModel HomogenizedModel::scalar(int d, double kappa, HomFlavor flavor) {
  std::vector<double> a(static_cast<std::size_t>(d * d), 0.0);
  for (int i = 0; i < d; ++i) a[static_cast<std::size_t>(i * d + i)] = kappa;
  return make(d, std::move(a), flavor);
}

HomogenizedModel HomogenizedModel::from_effective(const EffectiveMatrix& q, HomFlavor flavor,
                                                  const EllipticityBounds& b, double sigmas) {
  const int d = q.d;
  std::vector<double> a(static_cast<std::size_t>(d * d));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      a[static_cast<std::size_t>(i * d + j)] =
          0.5 * (q.q[static_cast<std::size_t>(i * d + j)].real() + q.q[static_cast<std::size_t>(j * d + i)].real());
  auto m = make(d, std::move(a), flavor);
  const auto [lo, hi] = m.eigen_range();
  const double slack = sigmas * q.sigma();
  if (lo < b.lambda - slack || hi > b.Lambda + slack)
    throw EllipticityError("homogenized model: effective matrix outside ellipticity bounds");
  return m;
}

HomogenizedModel HomogenizedModel::with_flavor(HomFlavor f) const {
  HomogenizedModel m = *this;
  m.flavor = f;
  return m;
}

std::pair<double, double> HomogenizedModel::eigen_range() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(as_matrix(*this), Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(d - 1)};
}

double HomogenizedModel::quad(std::span<const double> xi) const {
  double s = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      s += xi[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i * d + j)] * xi[static_cast<std::size_t>(j)];
  return s;
}

double HomogenizedModel::lattice_symbol(std::span<const double> zeta) const {
  const auto e = phase_vector(zeta);
  cplx s = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      s += std::conj(e[static_cast<std::size_t>(i)]) * a[static_cast<std::size_t>(i * d + j)] *
           e[static_cast<std::size_t>(j)];
  return s.real();
}

namespace {

std::vector<double> lattice_multipliers(const HomogenizedModel& m, const LatticeBox& box) {
  if (m.flavor != HomFlavor::lattice) throw ConfigError("lattice Green's function needs the lattice flavor");
  if (box.dim() != m.d) throw DimensionError("lattice Green's function: box dimension mismatch");
  std::vector<double> mult(box.size());
  std::vector<int> k(static_cast<std::size_t>(m.d));
  std::vector<double> zeta(k.size());
  for (std::size_t s = 0; s < box.size(); ++s) {
    box.coords(s, k);
    for (std::size_t a = 0; a < k.size(); ++a) zeta[a] = fft::frequency(k[a], box.side(static_cast<int>(a)));
    mult[s] = 1.0 - m.lattice_symbol(zeta);
    if (!(mult[s] > -1.0 && mult[s] <= 1.0 + 1e-14))
      throw StabilityError("lattice Green's function: 1 - e* a e leaves (-1, 1]");
  }
  return mult;
}

}  // namespace

LatticeGreenTable lattice_hom_green_table(const HomogenizedModel& m, const LatticeBox& box,
                                          std::span<const int> times) {
  const auto mult = lattice_multipliers(m, box);
  LatticeGreenTable tab;
  tab.box = box;
  tab.times.assign(times.begin(), times.end());
  const std::size_t n = box.size();
  tab.values.resize(times.size() * n);
  std::vector<cplx> buf(n);
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    if (times[ti] < 0) throw ConfigError("lattice Green's function: negative time");
    for (std::size_t s = 0; s < n; ++s) buf[s] = std::pow(mult[s], times[ti]);
    fft::backward(buf, box.sides());
    for (std::size_t s = 0; s < n; ++s) tab.values[ti * n + s] = buf[s].real() / static_cast<double>(n);
  }
  return tab;
}

double lattice_hom_green(const HomogenizedModel& m, const LatticeBox& box, std::span<const int> x, int t) {
  if (t < 0) throw ConfigError("lattice Green's function: negative time");
  const auto mult = lattice_multipliers(m, box);
  std::vector<int> k(static_cast<std::size_t>(m.d));
  double acc = 0.0;
  for (std::size_t s = 0; s < box.size(); ++s) {
    box.coords(s, k);
    double ph = 0.0;
    for (std::size_t a = 0; a < k.size(); ++a) ph += fft::frequency(k[a], box.side(static_cast<int>(a))) * x[a];
    acc += std::cos(ph) * std::pow(mult[s], t);
  }
  return acc / static_cast<double>(box.size());
}

double continuum_green(const HomogenizedModel& m, std::span<const double> x, double t) {
  if (m.flavor != HomFlavor::continuum) throw ConfigError("continuum Green's function needs the continuum flavor");
  if (!(t > 0.0)) throw ConfigError("continuum Green's function: t must be positive");
  if (static_cast<int>(x.size()) != m.d) throw DimensionError("continuum Green's function: x dimension mismatch");
  double quad = 0.0, det = 0.0;
  if (m.d == 1) {
    det = m.a[0];
    quad = x[0] * x[0] / m.a[0];
  } else {
    const auto A = as_matrix(m);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    det = A.determinant();
    Eigen::VectorXd v(m.d);
    for (int i = 0; i < m.d; ++i) v(i) = x[static_cast<std::size_t>(i)];
    quad = v.dot(ldlt.solve(v));
  }
  if (!(det > 0.0)) throw EllipticityError("continuum Green's function: singular a");
  return std::exp(-quad / (4.0 * t)) / (std::pow(4.0 * std::numbers::pi * t, 0.5 * m.d) * std::sqrt(det));
}

std::vector<QuadratureValue> u_hom(const HomogenizedModel& m, const Profile& f,
                                   const std::vector<std::vector<double>>& x, double t, double rel_tol) {
  if (t < 0.0) throw ConfigError("u_hom: t must be nonnegative");
  if (f.amplitude == 0.0) return std::vector<QuadratureValue>(x.size());
  for (const auto& p : x)
    if (static_cast<int>(p.size()) != m.d) throw DimensionError("u_hom: point dimension mismatch");
  const int d = m.d;
  if (t == 0.0) {
    // The inverse transform of f̂ is f itself.
    std::vector<QuadratureValue> out;
    for (const auto& p : x) out.push_back({f.value(p), 0.0, 0});
    return out;
  }
  constexpr double kTruncTol = 1e-15;
  double Xi = f.frequency_cutoff(kTruncTol);
  const double lmin = m.eigen_range().first;
  if (t > 0.0) Xi = std::min(Xi, std::sqrt(std::log(1.0 / kTruncTol) / (lmin * t)));
  const double peak = std::abs(f.fourier(std::vector<double>(static_cast<std::size_t>(d), 0.0)));
  const double norm = std::pow(2.0 * std::numbers::pi, -d);
  const double trunc = 2.0 * d * kTruncTol * peak * std::pow(2.0 * Xi, d) * norm;
  const std::size_t npts = x.size();
  const std::size_t max_nodes = d == 1 ? (1u << 20) : (d == 2 ? (1u << 24) : (1u << 25));

  std::vector<double> prev(npts, 0.0), cur(npts, 0.0);
  std::vector<QuadratureValue> out(npts);
  int P = 32;
  bool have_prev = false;
  for (;;) {
    const double h = 2.0 * Xi / P;
    std::vector<double> nodes(static_cast<std::size_t>(P + 1)), fh(nodes.size());
    for (int k = 0; k <= P; ++k) {
      nodes[static_cast<std::size_t>(k)] = -Xi + h * k;
      const double xi1 = nodes[static_cast<std::size_t>(k)];
      fh[static_cast<std::size_t>(k)] = f.fourier(std::span<const double>(&xi1, 1)) * (k == 0 || k == P ? 0.5 : 1.0);
    }
    const double amp_fix = std::pow(f.amplitude, 1 - d);
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(P + 1);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ip = 0; ip < static_cast<std::ptrdiff_t>(npts); ++ip) {
      const auto& pt = x[static_cast<std::size_t>(ip)];
      std::vector<double> xi(static_cast<std::size_t>(d));
      double acc = 0.0;
      for (std::size_t node = 0; node < total; ++node) {
        std::size_t r = node;
        double w = amp_fix, ph = 0.0;
        for (int a = 0; a < d; ++a) {
          const auto k = r % static_cast<std::size_t>(P + 1);
          r /= static_cast<std::size_t>(P + 1);
          xi[static_cast<std::size_t>(a)] = nodes[k];
          w *= fh[k];
          ph += nodes[k] * pt[static_cast<std::size_t>(a)];
        }
        acc += w * std::exp(-m.quad(xi) * t) * std::cos(ph);
      }
      cur[static_cast<std::size_t>(ip)] = acc * std::pow(h, d) * norm;
    }
    double scale = 0.0, change = 0.0;
    for (std::size_t i = 0; i < npts; ++i) {
      scale = std::max(scale, std::abs(cur[i]));
      change = std::max(change, std::abs(cur[i] - prev[i]));
    }
    const bool done = have_prev && change <= rel_tol * std::max(scale, 1e-300);
    const bool exhausted = total * static_cast<std::size_t>(1u << d) > max_nodes;
    if (done || exhausted) {
      for (std::size_t i = 0; i < npts; ++i)
        out[i] = {cur[i], std::abs(cur[i] - prev[i]) + trunc, P};
      return out;
    }
    prev = cur;
    have_prev = true;
    P *= 2;
  }
}

QuadratureValue u_hom(const HomogenizedModel& m, const Profile& f, std::span<const double> x, double t,
                      double rel_tol) {
  const std::vector<std::vector<double>> pts{std::vector<double>(x.begin(), x.end())};
  return u_hom(m, f, pts, t, rel_tol).front();
}

IdentityCheck identity_check_P2(double kappa, std::span<const double> xi, double t, double eps, double re_eta,
                                int panels, double tol, int max_panels) {
  IdentityCheck out;
  if (panels < 64) panels = 64;
  if (!(eps > 0.0) || !(re_eta > 0.0) || !(kappa > 0.0)) {
    out.residual = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double steps = t / (eps * eps);
  const long n = std::lround(steps);
  std::vector<double> sxi(xi.size());
  for (std::size_t j = 0; j < xi.size(); ++j) sxi[j] = eps * xi[j];
  const double c = kappa * phase_norm2(sxi);
  out.rhs = std::pow(1.0 - c, static_cast<double>(n));
  // In w = ε²η the contour is Re w = ε² Re η, Im w ∈ [-π, π]; the integrand is 2π-periodic.
  const double a = eps * eps * re_eta;
  cplx prev{};
  bool have_prev = false;
  for (int P = panels; P <= max_panels; P *= 2) {
    cplx acc = 0.0;
    for (int k = 0; k < P; ++k) {
      const double s = -std::numbers::pi + 2.0 * std::numbers::pi * k / P;
      const cplx w(a, s);
      acc += std::exp(w * static_cast<double>(n + 1)) / (std::exp(w) - 1.0 + c);
    }
    acc /= static_cast<double>(P);
    const double res = std::abs(acc - out.rhs) / std::max(std::abs(out.rhs), 1e-300);
    out.residuals.push_back(res);
    out.panel_counts.push_back(P);
    out.lhs_re = acc.real();
    out.lhs_im = acc.imag();
    out.residual = res;
    out.panels = P;
    if (have_prev && std::abs(acc - prev) <= tol * std::max(std::abs(acc), 1e-300)) break;
    prev = acc;
    have_prev = true;
  }
  return out;
}

LatticeContinuumReport lattice_vs_continuum(const HomogenizedModel& m, int t_min, int t_max, double slack) {
  if (t_min < 1 || t_max - t_min + 1 < 16) throw FitError("lattice_vs_continuum: fewer than 16 times");
  const int d = m.d;
  const auto lat = m.with_flavor(HomFlavor::lattice);
  const auto cont = m.with_flavor(HomFlavor::continuum);
  const double Lam = m.eigen_range().second;
  const int side = kernel_box_side(d, Lam, t_max);
  LatticeBox box(std::vector<int>(static_cast<std::size_t>(d), side));
  LatticeContinuumReport rep;
  for (int t = t_min; t <= t_max; ++t) rep.times.push_back(t);
  const auto tab = lattice_hom_green_table(lat, box, rep.times);
  std::vector<int> xi0(static_cast<std::size_t>(d), 0), xi1 = xi0, xi2 = xi0;
  xi1[0] = 1;
  xi2[0] = 2;
  std::vector<double> xr0(xi0.begin(), xi0.end()), xr1(xi1.begin(), xi1.end()), xr2(xi2.begin(), xi2.end());
  for (std::size_t ti = 0; ti < rep.times.size(); ++ti) {
    const double t = rep.times[ti];
    const double l0 = tab.at(xi0, ti), l1 = tab.at(xi1, ti), l2 = tab.at(xi2, ti);
    const double c0 = continuum_green(cont, xr0, t), c1 = continuum_green(cont, xr1, t),
                 c2 = continuum_green(cont, xr2, t);
    rep.diff[0].push_back(std::abs(l0 - c0));
    rep.diff[1].push_back(std::abs((l1 - l0) - (c1 - c0)));
    rep.diff[2].push_back(std::abs((l2 - 2.0 * l1 + l0) - (c2 - 2.0 * c1 + c0)));
  }
  rep.verdict = Verdict::pass;
  for (int k = 0; k < 3; ++k) {
    rep.threshold[k] = 0.5 * (d + 1 + k) - slack;
    std::vector<double> x, y, se;
    for (std::size_t ti = 0; ti < rep.times.size(); ++ti)
      if (rep.diff[k][ti] > 0.0) {
        x.push_back(rep.times[ti]);
        y.push_back(rep.diff[k][ti]);
        se.push_back(0.0);
      }
    auto& f = rep.order[k];
    f.npoints = x.size();
    f.excluded = rep.times.size() - x.size();
    f.t_lo = t_min;
    f.t_hi = t_max;
    if (x.size() < 16) {
      f.verdict = Verdict::inconclusive;
      f.note = "fewer than 16 nonzero differences";
      rep.verdict = worst(rep.verdict, f.verdict);
      continue;
    }
    const auto pl = power_law_fit(x, y, se);
    f.C = std::exp(pl.log_c);
    f.alpha = -pl.exponent;
    f.band_lo = -pl.band_hi;
    f.band_hi = -pl.band_lo;
    f.verdict = f.alpha >= rep.threshold[k] ? Verdict::pass : Verdict::fail;
    f.note = "decay exponent of order-" + std::to_string(k) + " difference at x=0";
    rep.verdict = worst(rep.verdict, f.verdict);
  }
  // Nondecreasing within the fitted bands.
  rep.ladder_monotone = true;
  for (int k = 0; k + 1 < 3; ++k) {
    const auto& a = rep.order[k];
    const auto& b = rep.order[k + 1];
    const double tol = 0.5 * (a.band_hi - a.band_lo) + 0.5 * (b.band_hi - b.band_lo);
    if (b.alpha < a.alpha - tol) rep.ladder_monotone = false;
  }
  if (!rep.ladder_monotone) rep.verdict = worst(rep.verdict, Verdict::fail);
  return rep;
}

}  // namespace parahom
