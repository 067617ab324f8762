#include "parahom/environment.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "parahom/fft.hpp"
#include "parahom/rng.hpp"
#include "parahom/stats.hpp"

namespace parahom {

const char* to_string(EnvironmentKind k) noexcept {
  switch (k) {
    case EnvironmentKind::constant: return "constant";
    case EnvironmentKind::iid_bernoulli: return "iid-bernoulli";
    case EnvironmentKind::iid_general: return "iid-general";
    case EnvironmentKind::langevin_field: return "langevin-field";
  }
  return "unknown";
}

EnvironmentKind environment_kind_from_string(const std::string& s) {
  if (s == "constant") return EnvironmentKind::constant;
  if (s == "iid-bernoulli") return EnvironmentKind::iid_bernoulli;
  if (s == "iid-general") return EnvironmentKind::iid_general;
  if (s == "langevin-field") return EnvironmentKind::langevin_field;
  throw ConfigError("unknown environment kind '" + s + "'");
}

const char* to_string(SiteFamily f) noexcept {
  switch (f) {
    case SiteFamily::point_mass: return "point-mass";
    case SiteFamily::uniform_scalar: return "uniform-scalar";
    case SiteFamily::uniform_diagonal: return "uniform-diagonal";
  }
  return "unknown";
}

SiteFamily site_family_from_string(const std::string& s) {
  if (s == "point-mass") return SiteFamily::point_mass;
  if (s == "uniform-scalar") return SiteFamily::uniform_scalar;
  if (s == "uniform-diagonal") return SiteFamily::uniform_diagonal;
  throw ConfigError("unknown site family '" + s + "'");
}

double Potential::derivative(double z) const noexcept {
  double v = a * z;
  if (kind == PotentialKind::convex_sqrt) v += eps * z / std::sqrt(1.0 + z * z);
  return v;
}

double CoefficientMap::operator()(double s) const noexcept { return kappa * (c0 + c1 * std::tanh(s)); }

void LangevinSpec::validate(int d) const {
  if (!(mass > 0.0)) throw ConfigError("langevin: mass must be positive");
  if (!(potential.a > 0.0) || potential.eps < 0.0) throw ConfigError("langevin: potential must be uniformly convex");
  if (!(coeff.kappa > 0.0) || !(coeff.c1 >= 0.0) || !(coeff.c0 > coeff.c1))
    throw EllipticityError("langevin: coefficient map needs kappa > 0 and c0 > c1 >= 0");
  if (!(dt > 0.0)) throw ConfigError("langevin: dt must be positive");
  const double contraction = dt * (4.0 * d * potential.curvature_hi() + mass * mass) / 2.0;
  if (!(contraction < 0.5)) throw StabilityError("langevin: dt too large for Euler-Maruyama drift contraction");
  if (!(grid_spacing >= dt)) throw ConfigError("langevin: grid_spacing must be >= dt");
  if (burn_in < 0.0) throw ConfigError("langevin: negative burn-in");
  if (box_side < 2) throw ConfigError("langevin: box side must be >= 2");
}

EnvironmentSpec EnvironmentSpec::constant(int d, double kappa, std::uint64_t seed) {
  EnvironmentSpec s;
  s.kind = EnvironmentKind::constant;
  s.d = d;
  s.kappa = kappa;
  s.seed = seed;
  s.bounds = EllipticityBounds(kappa, kappa, d);
  return s;
}

EnvironmentSpec EnvironmentSpec::bernoulli(int d, double kappa, double gamma, std::uint64_t seed) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("bernoulli: gamma must lie in [0,1)");
  EnvironmentSpec s;
  s.kind = EnvironmentKind::iid_bernoulli;
  s.d = d;
  s.kappa = kappa;
  s.gamma = gamma;
  s.seed = seed;
  s.bounds = EllipticityBounds(kappa * (1.0 - gamma), kappa * (1.0 + gamma), d);
  return s;
}

EnvironmentSpec EnvironmentSpec::general(int d, SiteFamily family, double lambda, double Lambda,
                                         std::uint64_t seed) {
  EnvironmentSpec s;
  s.kind = EnvironmentKind::iid_general;
  s.d = d;
  s.family = family;
  s.seed = seed;
  s.bounds = EllipticityBounds(lambda, Lambda, d);
  s.kappa = family == SiteFamily::point_mass ? lambda : 0.5 * (lambda + Lambda);
  return s;
}

EnvironmentSpec EnvironmentSpec::langevin_field(int d, const LangevinSpec& ls, std::uint64_t seed) {
  EnvironmentSpec s;
  s.kind = EnvironmentKind::langevin_field;
  s.d = d;
  s.langevin = ls;
  s.seed = seed;
  s.kappa = ls.coeff.kappa;
  s.bounds = EllipticityBounds(ls.coeff.lambda(), ls.coeff.Lambda(), d);
  return s;
}

bool EnvironmentSpec::deterministic() const noexcept {
  return kind == EnvironmentKind::constant ||
         (kind == EnvironmentKind::iid_general && family == SiteFamily::point_mass);
}

void EnvironmentSpec::validate() const {
  if (d < 1 || d > 3) throw ConfigError("environment: d must be 1, 2 or 3");
  if (bounds.d != d) throw ConfigError("environment: ellipticity dimension mismatch");
  switch (kind) {
    case EnvironmentKind::constant:
      if (!(kappa > 0.0)) throw ConfigError("constant: kappa must be positive");
      bounds.require_discrete_stable();
      break;
    case EnvironmentKind::iid_bernoulli:
      if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("bernoulli: gamma must lie in [0,1)");
      bounds.require_discrete_stable();
      break;
    case EnvironmentKind::iid_general:
      bounds.require_discrete_stable();
      if (family == SiteFamily::point_mass && (kappa < bounds.lambda || kappa > bounds.Lambda))
        throw EllipticityError("iid-general: point mass outside [lambda, Lambda]");
      break;
    case EnvironmentKind::langevin_field:
      langevin.validate(d);
      break;
  }
}

double EnvironmentSpec::mean_scalar() const {
  switch (kind) {
    case EnvironmentKind::constant:
    case EnvironmentKind::iid_bernoulli: return kappa;
    case EnvironmentKind::iid_general:
      return family == SiteFamily::point_mass ? kappa : 0.5 * (bounds.lambda + bounds.Lambda);
    case EnvironmentKind::langevin_field: return std::numeric_limits<double>::quiet_NaN();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

namespace {

CoefficientPath empty_path(const EnvironmentSpec& spec, const LatticeBox& box, int T, std::uint64_t stream) {
  if (box.dim() != spec.d) throw DimensionError("environment: box dimension mismatch");
  if (T < 0) throw SizingError("environment: negative horizon");
  CoefficientPath p;
  p.box = box;
  p.step = 1.0;
  p.continuous = false;
  p.bounds = spec.bounds;
  p.kind = spec.kind;
  p.seed = spec.seed;
  p.stream = stream;
  p.times.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) p.times[static_cast<std::size_t>(t)] = t;
  p.slices.reserve(static_cast<std::size_t>(T));
  return p;
}

}  // namespace

CoefficientPath sample_constant(const EnvironmentSpec& spec, const LatticeBox& box, int T) {
  if (spec.kind != EnvironmentKind::constant) throw ConfigError("sample_constant: wrong environment kind");
  spec.validate();
  auto p = empty_path(spec, box, T, 0);
  if (T > 0) {
    auto s = CoefficientSlice::constant(box, spec.kappa, spec.bounds);
    for (int t = 0; t < T; ++t) p.slices.push_back(s);
  }
  return p;
}

CoefficientPath sample_iid_bernoulli(const EnvironmentSpec& spec, const LatticeBox& box, int T,
                                     std::uint64_t stream) {
  if (spec.kind != EnvironmentKind::iid_bernoulli) throw ConfigError("sample_iid_bernoulli: wrong kind");
  spec.validate();
  auto p = empty_path(spec, box, T, stream);
  const CounterRng rng(spec.seed, Purpose::bernoulli);
  const std::size_t n = box.size();
  const int d = box.dim();
  const double lo = spec.kappa * (1.0 - spec.gamma), hi = spec.kappa * (1.0 + spec.gamma);
  std::vector<double> s(n);
  for (int t = 0; t < T; ++t) {
    if (spec.gamma == 0.0) {
      std::fill(s.begin(), s.end(), spec.kappa);
    } else {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        int x[3];
        box.coords(static_cast<std::size_t>(i), std::span<int>(x, static_cast<std::size_t>(d)));
        s[static_cast<std::size_t>(i)] = rng.sign(stream, t, x, d) > 0 ? hi : lo;
      }
    }
    p.slices.push_back(CoefficientSlice::scalar(box, s, spec.bounds));
  }
  return p;
}

CoefficientPath sample_iid_general(const EnvironmentSpec& spec, const LatticeBox& box, int T,
                                   std::uint64_t stream) {
  if (spec.kind != EnvironmentKind::iid_general) throw ConfigError("sample_iid_general: wrong kind");
  spec.validate();
  auto p = empty_path(spec, box, T, stream);
  const CounterRng rng(spec.seed, Purpose::general_site);
  const CounterRng rng_extra(spec.seed, Purpose::general_site_extra);
  const std::size_t n = box.size();
  const int d = box.dim();
  const auto dd = static_cast<std::size_t>(d * d);
  const double lo = spec.bounds.lambda, hi = spec.bounds.Lambda;
  for (int t = 0; t < T; ++t) {
    std::vector<double> v(n * dd, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const auto si = static_cast<std::size_t>(i);
      int x[3];
      box.coords(si, std::span<int>(x, static_cast<std::size_t>(d)));
      const auto w = rng.words(stream, t, x, d);
      for (int k = 0; k < d; ++k) {
        double val = spec.kappa;
        if (spec.family == SiteFamily::uniform_scalar) {
          val = lo + (hi - lo) * u01_open(w[0], w[1]);
        } else if (spec.family == SiteFamily::uniform_diagonal) {
          if (k < 2) {
            val = lo + (hi - lo) * u01_open(w[static_cast<std::size_t>(2 * k)], w[static_cast<std::size_t>(2 * k + 1)]);
          } else {
            val = lo + (hi - lo) * rng_extra.uniform(stream, t, x, d);
          }
        }
        v[si * dd + static_cast<std::size_t>(k * d + k)] = val;
      }
    }
    p.slices.emplace_back(box, std::move(v), spec.bounds);
  }
  return p;
}

namespace {

std::vector<double> symbol_e2(const LatticeBox& box) {
  std::vector<double> e2(box.size(), 0.0);
  std::vector<int> k(static_cast<std::size_t>(box.dim()));
  for (std::size_t s = 0; s < box.size(); ++s) {
    box.coords(s, k);
    for (int a = 0; a < box.dim(); ++a)
      e2[s] += 2.0 - 2.0 * std::cos(fft::frequency(k[static_cast<std::size_t>(a)], box.side(a)));
  }
  return e2;
}

// One Euler-Maruyama step. `noise_time` addresses the Brownian increments.
void em_step(const LangevinSpec& spec, const LatticeBox& box, const CounterRng& rng, std::uint64_t stream,
             std::int64_t noise_time, std::vector<double>& phi, std::vector<double>& flux,
             std::vector<double>& next) {
  const int d = box.dim();
  const std::size_t n = box.size();
  const auto ni = static_cast<std::ptrdiff_t>(n);
  const double dt = spec.dt;
  const double sdt = std::sqrt(dt);
  const double m2 = spec.mass * spec.mass;
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < ni; ++i) {
      const auto s = static_cast<std::size_t>(i);
      for (int k = 0; k < d; ++k)
        flux[static_cast<std::size_t>(k) * n + s] = spec.potential.derivative(phi[box.plus(s, k)] - phi[s]);
    }
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < ni; ++i) {
      const auto s = static_cast<std::size_t>(i);
      double div = 0.0;
      for (int k = 0; k < d; ++k) {
        const double* fk = flux.data() + static_cast<std::size_t>(k) * n;
        div += fk[box.minus(s, k)] - fk[s];
      }
      int x[3];
      box.coords(s, std::span<int>(x, static_cast<std::size_t>(d)));
      const double z = rng.normal_pair(stream, noise_time, x, d).first;
      next[s] = phi[s] - 0.5 * dt * (div + m2 * phi[s]) + sdt * z;
    }
  }
  phi.swap(next);
}

}  // namespace

ScalarField gibbs_initial(const LangevinSpec& spec, const LatticeBox& box, std::uint64_t seed,
                          std::uint64_t stream) {
  spec.validate(box.dim());
  const std::size_t n = box.size();
  const int d = box.dim();
  if (spec.potential.kind == PotentialKind::quadratic) {
    const CounterRng rng(seed, Purpose::gibbs_noise);
    std::vector<cplx> buf(n);
    for (std::size_t s = 0; s < n; ++s) {
      int x[3];
      box.coords(s, std::span<int>(x, static_cast<std::size_t>(d)));
      buf[s] = rng.normal_pair(stream, 0, x, d).first;
    }
    fft::forward(buf, box.sides());
    const auto e2 = symbol_e2(box);
    const double m2 = spec.mass * spec.mass;
    for (std::size_t s = 0; s < n; ++s) buf[s] /= std::sqrt(spec.potential.a * e2[s] + m2);
    fft::backward(buf, box.sides());
    ScalarField phi(box);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t s = 0; s < n; ++s) phi[s] = buf[s].real() * inv;
    return phi;
  }
  const CounterRng rng(seed, Purpose::langevin_noise);
  std::vector<double> phi(n, 0.0), flux(n * static_cast<std::size_t>(d)), next(n);
  const auto steps = static_cast<std::int64_t>(std::ceil(spec.burn_in / spec.dt));
  // Burn-in increments use negative times so they never collide with the path's.
  for (std::int64_t k = 0; k < steps; ++k) em_step(spec, box, rng, stream, -1 - k, phi, flux, next);
  return ScalarField(box, std::move(phi));
}

FieldPath langevin_path(const LangevinSpec& spec, const ScalarField& init, double horizon, std::uint64_t seed,
                        std::uint64_t stream, double record_every) {
  const auto& box = init.box();
  spec.validate(box.dim());
  if (!(horizon > 0.0)) throw ConfigError("langevin_path: horizon must be positive");
  const double rec = record_every > 0.0 ? record_every : spec.grid_spacing;
  const auto per_record = static_cast<std::int64_t>(std::llround(rec / spec.dt));
  if (per_record < 1 || std::abs(static_cast<double>(per_record) * spec.dt - rec) > 1e-9 * rec)
    throw ConfigError("langevin_path: record spacing must be a multiple of dt");
  const auto records = static_cast<std::size_t>(std::ceil(horizon / rec - 1e-12));
  const std::size_t n = box.size();
  FieldPath out;
  out.box = box;
  out.times.reserve(records);
  out.values.reserve(records * n);
  const CounterRng rng(seed, Purpose::langevin_noise);
  std::vector<double> phi(init.values().begin(), init.values().end());
  std::vector<double> flux(n * static_cast<std::size_t>(box.dim())), next(n);
  std::int64_t step = 0;
  for (std::size_t r = 0; r < records; ++r) {
    out.times.push_back(static_cast<double>(r) * rec);
    out.values.insert(out.values.end(), phi.begin(), phi.end());
    if (r + 1 == records) break;
    for (std::int64_t k = 0; k < per_record; ++k, ++step) em_step(spec, box, rng, stream, step, phi, flux, next);
  }
  return out;
}

CoefficientPath coefficients_of_field(const FieldPath& path, const CoefficientMap& map,
                                      const EllipticityBounds& bounds, double step) {
  CoefficientPath p;
  p.box = path.box;
  p.times = path.times;
  p.step = step;
  p.continuous = true;
  p.bounds = bounds;
  p.kind = EnvironmentKind::langevin_field;
  std::vector<double> s(path.box.size());
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    auto phi = path.at(k);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = map(phi[i]);
    p.slices.push_back(CoefficientSlice::scalar(path.box, s, bounds));
  }
  return p;
}

CoefficientPath sample_path(const EnvironmentSpec& spec, const LatticeBox& box, double horizon,
                            std::uint64_t stream) {
  switch (spec.kind) {
    case EnvironmentKind::constant: return sample_constant(spec, box, static_cast<int>(std::llround(horizon)));
    case EnvironmentKind::iid_bernoulli:
      return sample_iid_bernoulli(spec, box, static_cast<int>(std::llround(horizon)), stream);
    case EnvironmentKind::iid_general:
      return sample_iid_general(spec, box, static_cast<int>(std::llround(horizon)), stream);
    case EnvironmentKind::langevin_field: {
      const auto& ls = spec.langevin;
      auto init = gibbs_initial(ls, box, spec.seed, stream);
      auto field = langevin_path(ls, init, horizon, spec.seed, stream);
      auto p = coefficients_of_field(field, ls.coeff, spec.bounds, ls.grid_spacing);
      p.seed = spec.seed;
      p.stream = stream;
      return p;
    }
  }
  throw ConfigError("sample_path: unknown kind");
}

namespace {
GaussianCovariance covariance_from_symbol(const LangevinSpec& spec, const LatticeBox& box, double dt) {
  const auto e2 = symbol_e2(box);
  const double m2 = spec.mass * spec.mass;
  const std::size_t n = box.size();
  std::vector<int> k(static_cast<std::size_t>(box.dim()));
  GaussianCovariance c;
  for (std::size_t s = 0; s < n; ++s) {
    const double mu = spec.potential.a * e2[s] + m2;
    double v = 1.0 / mu;
    // EM chain φ' = (1 - dt μ/2) φ + sqrt(dt) Z has stationary variance dt / (1 - (1 - dt μ/2)²).
    if (dt > 0.0) v = 1.0 / (mu * (1.0 - dt * mu / 4.0));
    box.coords(s, k);
    c.variance += v;
    c.lag1 += v * std::cos(fft::frequency(k[0], box.side(0)));
  }
  c.variance /= static_cast<double>(n);
  c.lag1 /= static_cast<double>(n);
  return c;
}
}  // namespace

GaussianCovariance exact_gibbs_covariance(const LangevinSpec& spec, const LatticeBox& box) {
  return covariance_from_symbol(spec, box, 0.0);
}

GaussianCovariance euler_maruyama_covariance(const LangevinSpec& spec, const LatticeBox& box, double dt) {
  return covariance_from_symbol(spec, box, dt);
}

}  // namespace parahom

namespace parahom {

FieldMoments langevin_moments(const LangevinSpec& spec, const LatticeBox& box, double dt, std::size_t samples,
                              double relax, int records, double record_every, std::uint64_t seed,
                              std::uint64_t stream_offset) {
  LangevinSpec ls = spec;
  ls.dt = dt;
  ls.validate(box.dim());
  if (samples < 2) throw ConfigError("langevin_moments: need at least 2 samples");
  if (records < 1 || !(record_every > 0.0) || relax < 0.0) throw ConfigError("langevin_moments: bad record schedule");
  const double skip = relax / record_every;
  if (std::abs(skip - std::round(skip)) > 1e-9) throw ConfigError("langevin_moments: relax must be a multiple of record_every");
  const auto first = static_cast<std::size_t>(std::llround(skip));
  const double horizon = relax + records * record_every;
  const std::size_t n = box.size();

  auto one = [&](std::size_t idx) {
    const std::uint64_t stream = stream_offset + idx;
    const auto init = gibbs_initial(ls, box, seed, stream);
    const auto path = langevin_path(ls, init, horizon, seed, stream, record_every);
    double v = 0.0, c = 0.0;
    for (std::size_t r = first; r < path.times.size(); ++r) {
      const auto phi = path.at(r);
      for (std::size_t s = 0; s < n; ++s) {
        v += phi[s] * phi[s];
        c += phi[s] * phi[box.plus(s, 0)];
      }
    }
    const double cnt = static_cast<double>(n * (path.times.size() - first));
    return std::pair<double, double>{v / cnt, c / cnt};
  };

  RunningStats var, lag;
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, 4 * omp_get_max_threads()));
  std::vector<std::pair<double, double>> buf(chunk);
  for (std::size_t start = 0; start < samples; start += chunk) {
    const std::size_t m = std::min(chunk, samples - start);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(m); ++j)
      buf[static_cast<std::size_t>(j)] = one(start + static_cast<std::size_t>(j));
    for (std::size_t j = 0; j < m; ++j) {
      var.push(buf[j].first);
      lag.push(buf[j].second);
    }
  }
  return {var.mean, var.stderr_mean(), lag.mean, lag.stderr_mean(), samples};
}

}  // namespace parahom
