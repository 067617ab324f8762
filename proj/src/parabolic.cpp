#include "parahom/parabolic.hpp"

#include <omp.h>

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <functional>
#include <numbers>

#include "parahom/stats.hpp"

namespace parahom {

const char* to_string(ProfileKind k) noexcept {
  return k == ProfileKind::gaussian ? "gaussian" : "compact-bump";
}

ProfileKind profile_kind_from_string(const std::string& s) {
  if (s == "gaussian") return ProfileKind::gaussian;
  if (s == "compact-bump") return ProfileKind::compact_bump;
  throw ConfigError("unknown profile kind '" + s + "'");
}

namespace {

double bump(double s) { return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }

// ∫_{-1}^{1} β(s) cos(ks) ds, fixed Gauss-Legendre on pieces short against the oscillation.
double bump_fourier(double k) {
  k = std::abs(k);
  auto f = [k](double s) { return bump(s) * std::cos(k * s); };
  const int pieces = 8 + static_cast<int>(std::ceil(k / 2.0));
  double acc = 0.0;
  for (int i = 0; i < pieces; ++i)
    acc += boost::math::quadrature::gauss<double, 30>::integrate(f, static_cast<double>(i) / pieces,
                                                                 static_cast<double>(i + 1) / pieces);
  return 2.0 * acc;
}

double axis_fourier(const Profile& p, double xi) {
  const double k = p.width * xi;
  if (p.kind == ProfileKind::gaussian) return p.width * std::sqrt(2.0 * std::numbers::pi) * std::exp(-0.5 * k * k);
  return p.width * bump_fourier(k);
}

}  // namespace

double Profile::value(std::span<const double> z) const {
  double v = amplitude;
  for (double zj : z) {
    const double s = zj / width;
    v *= kind == ProfileKind::gaussian ? std::exp(-0.5 * s * s) : bump(s);
  }
  return v;
}

double Profile::fourier(std::span<const double> xi) const {
  double v = amplitude;
  for (double x : xi) v *= axis_fourier(*this, x);
  return v;
}

double Profile::frequency_cutoff(double tol) const {
  if (kind == ProfileKind::gaussian) return std::sqrt(2.0 * std::log(1.0 / tol)) / width;
  // |β̂(k)| <= 4 k^{-3/4} exp(-sqrt k) for k >= 10 (checked against 40-digit quadrature up to k = 1000).
  const double peak = bump_fourier(0.0);
  double k = 10.0;
  while (4.0 * std::pow(k, -0.75) * std::exp(-std::sqrt(k)) > tol * peak) k *= 1.01;
  return k / width;
}

InitialData InitialData::lattice(ScalarField h) {
  InitialData d;
  d.kind_ = Kind::lattice;
  d.h_ = std::move(h);
  return d;
}

InitialData InitialData::profile(Profile f, double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("initial data: eps must lie in (0,1]");
  InitialData d;
  d.kind_ = Kind::profile;
  d.f_ = f;
  d.eps_ = eps;
  return d;
}

InitialData InitialData::delta() { return InitialData{}; }

ScalarField InitialData::realize(const LatticeBox& box) const {
  if (kind_ == Kind::lattice) {
    if (!(h_.box() == box)) throw DimensionError("initial data box mismatch");
    return h_;
  }
  ScalarField h(box);
  if (kind_ == Kind::delta) {
    h[0] = 1.0;
    return h;
  }
  std::vector<int> x(static_cast<std::size_t>(box.dim()));
  std::vector<double> z(x.size());
  for (std::size_t s = 0; s < box.size(); ++s) {
    box.centered_coords(s, x);
    for (std::size_t a = 0; a < x.size(); ++a) z[a] = eps_ * x[a];
    h[s] = f_.value(z);
  }
  return h;
}

ScalarField step_discrete(const ScalarField& u, const CoefficientSlice& a) {
  if (!(a.box() == u.box())) throw DimensionError("step_discrete: box mismatch");
  a.bounds().require_discrete_stable();
  ScalarField out(u.box());
  std::vector<double> scratch(u.size() * static_cast<std::size_t>(u.box().dim()));
  step_divergence_form(a, u.values(), out.values(), scratch);
  return out;
}

namespace {

void check_snapshots_int(std::span<const int> times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0) throw SizingError("negative snapshot time");
    if (i > 0 && times[i] < times[i - 1]) throw SizingError("snapshot times must be nondecreasing");
  }
}

// Iterate the discrete equation, writing snapshots into `out` ([snapshot][site]).
void evolve_discrete_into(std::vector<double> u, const CoefficientPath& path, std::span<const int> times,
                          std::span<double> out) {
  const std::size_t n = path.box.size();
  std::vector<double> next(n), scratch(n * static_cast<std::size_t>(path.box.dim()));
  int t = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    while (t < times[k]) {
      step_divergence_form(path.slice(static_cast<std::size_t>(t)), u, next, scratch);
      u.swap(next);
      ++t;
    }
    std::copy(u.begin(), u.end(), out.begin() + static_cast<std::ptrdiff_t>(k * n));
  }
}

// u += c * (-∇*a∇v) into `acc`; helpers for RK4.
struct Rk4Work {
  std::vector<double> k1, k2, k3, k4, tmp, flux;
  explicit Rk4Work(std::size_t n, int d)
      : k1(n), k2(n), k3(n), k4(n), tmp(n), flux(n * static_cast<std::size_t>(d)) {}
};

void generator(const CoefficientSlice& a, std::span<const double> u, std::span<double> out, Rk4Work& w) {
  apply_divergence_form_into(a, u, out, w.flux);
  for (double& v : out) v = -v;
}

std::size_t rk4_segment(const CoefficientSlice& a, std::vector<double>& u, double len, double safety,
                        Rk4Work& w) {
  if (len <= 0.0) return 0;
  const double rate = 4.0 * a.dim() * a.bounds().Lambda;
  const auto nsub = static_cast<std::size_t>(std::max(1.0, std::ceil(len * rate / safety)));
  const double h = len / static_cast<double>(nsub);
  const std::size_t n = u.size();
  for (std::size_t s = 0; s < nsub; ++s) {
    generator(a, u, w.k1, w);
    for (std::size_t i = 0; i < n; ++i) w.tmp[i] = u[i] + 0.5 * h * w.k1[i];
    generator(a, w.tmp, w.k2, w);
    for (std::size_t i = 0; i < n; ++i) w.tmp[i] = u[i] + 0.5 * h * w.k2[i];
    generator(a, w.tmp, w.k3, w);
    for (std::size_t i = 0; i < n; ++i) w.tmp[i] = u[i] + h * w.k3[i];
    generator(a, w.tmp, w.k4, w);
    for (std::size_t i = 0; i < n; ++i) u[i] += h / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
  }
  return nsub;
}

std::size_t evolve_continuous_into(std::vector<double> u, const CoefficientPath& path,
                                   std::span<const double> times, double safety, std::span<double> out) {
  const std::size_t n = path.box.size();
  Rk4Work w(n, path.box.dim());
  std::size_t total = 0;
  double now = 0.0;
  std::size_t cell = 0;
  const double dt = path.step;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double target = times[k];
    while (now < target - 1e-12 * std::max(1.0, target)) {
      if (cell >= path.steps()) throw SizingError("evolve_continuous: path shorter than requested time");
      const double cell_end = static_cast<double>(cell + 1) * dt;
      const double stop = std::min(cell_end, target);
      total += rk4_segment(path.slice(cell), u, stop - now, safety, w);
      now = stop;
      if (now >= cell_end - 1e-12 * std::max(1.0, cell_end)) {
        now = cell_end;
        ++cell;
      }
    }
    std::copy(u.begin(), u.end(), out.begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return total;
}

}  // namespace

std::vector<ScalarField> evolve_discrete(const InitialData& h, const CoefficientPath& path,
                                         std::span<const int> snapshot_times) {
  if (path.continuous) throw ConfigError("evolve_discrete: continuous-time path");
  check_snapshots_int(snapshot_times);
  if (!snapshot_times.empty() && static_cast<std::size_t>(snapshot_times.back()) > path.steps())
    throw SizingError("evolve_discrete: path shorter than requested horizon");
  path.bounds.require_discrete_stable();
  const auto& box = path.box;
  auto h0 = h.realize(box);
  std::vector<double> buf(snapshot_times.size() * box.size());
  evolve_discrete_into(std::vector<double>(h0.values().begin(), h0.values().end()), path, snapshot_times, buf);
  std::vector<ScalarField> out;
  for (std::size_t k = 0; k < snapshot_times.size(); ++k)
    out.emplace_back(box, std::vector<double>(buf.begin() + static_cast<std::ptrdiff_t>(k * box.size()),
                                              buf.begin() + static_cast<std::ptrdiff_t>((k + 1) * box.size())));
  return out;
}

ContinuousEvolution evolve_continuous(const InitialData& h, const CoefficientPath& path,
                                      std::span<const double> times, double safety) {
  if (times.empty()) throw ConfigError("evolve_continuous: empty time list");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0) throw SizingError("negative snapshot time");
    if (i > 0 && times[i] < times[i - 1]) throw SizingError("snapshot times must be nondecreasing");
  }
  if (!(safety > 0.0 && safety <= 0.5)) throw StabilityError("evolve_continuous: safety must lie in (0, 0.5]");
  const auto& box = path.box;
  auto h0 = h.realize(box);
  std::vector<double> buf(times.size() * box.size());
  ContinuousEvolution res;
  res.substeps = evolve_continuous_into(std::vector<double>(h0.values().begin(), h0.values().end()), path, times,
                                        safety, buf);
  for (std::size_t k = 0; k < times.size(); ++k)
    res.snapshots.emplace_back(
        box, std::vector<double>(buf.begin() + static_cast<std::ptrdiff_t>(k * box.size()),
                                 buf.begin() + static_cast<std::ptrdiff_t>((k + 1) * box.size())));
  return res;
}

namespace {

GreenEstimate run_mc(const EnvironmentSpec& spec, const LatticeBox& box, std::span<const double> times,
                     std::size_t N, const McOptions& opt, bool parallel) {
  spec.validate();
  if (N < 2) throw ConfigError("green_mc_estimate: N must be >= 2");
  if (times.empty()) throw ConfigError("green_mc_estimate: empty time list");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i] < times[i - 1]) throw SizingError("green_mc_estimate: times must be nondecreasing");
  const bool discrete = spec.discrete_time();
  std::vector<int> itimes;
  if (discrete) {
    for (double t : times) {
      if (t < 0.0 || t != std::floor(t)) throw SizingError("discrete-time snapshots must be nonnegative integers");
      itimes.push_back(static_cast<int>(t));
    }
  }
  const double horizon = times.back();
  const std::size_t n = box.size();
  const std::size_t len = times.size() * n;
  const auto init_field = (opt.initial ? *opt.initial : InitialData::delta()).realize(box);
  const std::vector<double> init(init_field.values().begin(), init_field.values().end());

  auto one_sample = [&](std::size_t idx, std::span<double> out) {
    const std::uint64_t stream = opt.stream_offset + idx;
    if (discrete) {
      auto path = sample_path(spec, box, std::max(horizon, 0.0), stream);
      evolve_discrete_into(init, path, itimes, out);
    } else {
      const double cover = std::max(horizon, spec.langevin.grid_spacing);
      auto path = sample_path(spec, box, cover + spec.langevin.grid_spacing, stream);
      evolve_continuous_into(init, path, times, opt.rk_safety, out);
    }
  };

  const std::size_t B = std::max<std::size_t>(1, std::min(opt.batches, N));
  RunningFieldStats total(len);
  std::vector<RunningFieldStats> batch(B, RunningFieldStats(len));
  const int threads = parallel ? omp_get_max_threads() : 1;
  const std::size_t chunk = opt.chunk ? opt.chunk : static_cast<std::size_t>(std::max(1, 2 * threads));
  std::vector<double> buf(chunk * len);
  for (std::size_t start = 0; start < N; start += chunk) {
    const std::size_t m = std::min(chunk, N - start);
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
      for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(m); ++j)
        one_sample(start + static_cast<std::size_t>(j),
                   std::span<double>(buf.data() + static_cast<std::size_t>(j) * len, len));
    } else {
      for (std::size_t j = 0; j < m; ++j) one_sample(start + j, std::span<double>(buf.data() + j * len, len));
    }
    // Fixed-order fold.
    for (std::size_t j = 0; j < m; ++j) {
      std::span<const double> rec(buf.data() + j * len, len);
      total.push(rec);
      batch[(start + j) * B / N].push(rec);
    }
  }
  GreenEstimate est;
  est.box = box;
  est.times.assign(times.begin(), times.end());
  est.mean = total.mean();
  est.sem = total.stderr_mean();
  est.batches = B;
  est.batch_mean.reserve(B * len);
  for (auto& b : batch) est.batch_mean.insert(est.batch_mean.end(), b.mean().begin(), b.mean().end());
  est.N = N;
  est.seed = spec.seed;
  est.spec = spec;
  return est;
}

}  // namespace

GreenEstimate green_mc_estimate(const EnvironmentSpec& spec, const LatticeBox& box, std::span<const double> times,
                                std::size_t N, const McOptions& opt) {
  return run_mc(spec, box, times, N, opt, true);
}

namespace serial {
GreenEstimate green_mc_estimate(const EnvironmentSpec& spec, const LatticeBox& box, std::span<const double> times,
                                std::size_t N, const McOptions& opt) {
  return run_mc(spec, box, times, N, opt, false);
}
}  // namespace serial

namespace {

std::vector<cplx> mode_series(const GreenEstimate& est, std::span<const double> xi,
                              const std::function<std::span<const double>(std::size_t)>& rec) {
  const auto& box = est.box;
  std::vector<int> x(static_cast<std::size_t>(box.dim()));
  std::vector<cplx> phase(box.size());
  for (std::size_t s = 0; s < box.size(); ++s) {
    box.centered_coords(s, x);
    double arg = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) arg += xi[a] * x[a];
    phase[s] = std::polar(1.0, arg);
  }
  std::vector<cplx> out(est.times.size());
  for (std::size_t ti = 0; ti < est.times.size(); ++ti) {
    auto r = rec(ti);
    cplx acc = 0.0;
    for (std::size_t s = 0; s < box.size(); ++s) acc += r[s] * phase[s];
    out[ti] = acc;
  }
  return out;
}

struct SlopeResult {
  double slope = 0.0;
  std::size_t points = 0;
};

SlopeResult fit_slope(std::span<const double> t, std::span<const cplx> G, const ModeFitOptions& opt) {
  std::vector<double> X, y, w;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= 0.0 || t[i] < opt.t_min || t[i] > opt.t_max) continue;
    const double a = std::abs(G[i]);
    if (!(a > 0.0)) continue;
    X.push_back(1.0);
    X.push_back(t[i]);
    y.push_back(std::log(a));
    w.push_back(1.0);
  }
  SlopeResult r;
  r.points = y.size();
  if (y.size() < 3) throw FitError("fourier_mode_decay: fit window shorter than 3 points");
  auto fit = weighted_least_squares(X, y, w, 2, true);
  if (!fit.ok) throw FitError("fourier_mode_decay: singular fit");
  r.slope = fit.beta[1];
  return r;
}

double q_from_slope(double slope, double e2, bool discrete) {
  if (!(e2 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return discrete ? (1.0 - std::exp(slope)) / e2 : -slope / e2;
}

}  // namespace

std::vector<ModeDecay> fourier_mode_decay(const GreenEstimate& est, const std::vector<std::vector<double>>& modes,
                                          const ModeFitOptions& opt) {
  const bool discrete = est.spec.discrete_time();
  const std::size_t B = est.batches;
  std::vector<ModeDecay> out;
  for (const auto& xi : modes) {
    if (static_cast<int>(xi.size()) != est.box.dim()) throw DimensionError("mode dimension mismatch");
    ModeDecay md;
    md.xi = xi;
    md.t = est.times;
    md.G = mode_series(est, xi, [&](std::size_t ti) { return est.mean_at(ti); });
    double e2 = 0.0;
    for (double v : xi) e2 += 2.0 - 2.0 * std::cos(v);
    auto full = fit_slope(md.t, md.G, opt);
    md.slope = full.slope;
    md.window_points = full.points;
    md.q_direct = q_from_slope(full.slope, e2, discrete);
    md.G_stderr.assign(md.t.size(), 0.0);
    if (B >= 2) {
      // Batch sizes follow the contiguous block rule used by the estimator.
      std::vector<double> nb(B, 0.0);
      for (std::size_t i = 0; i < est.N; ++i) nb[i * B / est.N] += 1.0;
      std::vector<std::vector<cplx>> bs(B);
      for (std::size_t b = 0; b < B; ++b)
        bs[b] = mode_series(est, xi, [&](std::size_t ti) { return est.batch_at(b, ti); });
      std::vector<double> qj(B), gj_abs(B * md.t.size());
      const double Nd = static_cast<double>(est.N);
      for (std::size_t b = 0; b < B; ++b) {
        std::vector<cplx> Gm(md.t.size());
        for (std::size_t ti = 0; ti < md.t.size(); ++ti) {
          Gm[ti] = (Nd * md.G[ti] - nb[b] * bs[b][ti]) / (Nd - nb[b]);
          gj_abs[b * md.t.size() + ti] = std::abs(Gm[ti]);
        }
        qj[b] = std::isnan(md.q_direct) ? 0.0 : q_from_slope(fit_slope(md.t, Gm, opt).slope, e2, discrete);
      }
      const double fac = static_cast<double>(B - 1) / static_cast<double>(B);
      auto jk = [&](auto get) {
        double m = 0.0;
        for (std::size_t b = 0; b < B; ++b) m += get(b);
        m /= static_cast<double>(B);
        double v = 0.0;
        for (std::size_t b = 0; b < B; ++b) v += (get(b) - m) * (get(b) - m);
        return std::sqrt(fac * v);
      };
      md.q_stderr = std::isnan(md.q_direct) ? 0.0 : jk([&](std::size_t b) { return qj[b]; });
      for (std::size_t ti = 0; ti < md.t.size(); ++ti)
        md.G_stderr[ti] = jk([&](std::size_t b) { return gj_abs[b * md.t.size() + ti]; });
    }
    out.push_back(std::move(md));
  }
  return out;
}

}  // namespace parahom
