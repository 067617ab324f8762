#include "parahom/bounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "parahom/error.hpp"
#include "parahom/stats.hpp"

namespace parahom {

namespace {

// Reference kernel on the estimate's box and times, [time][site].
std::vector<double> reference_values(const GreenEstimate& est, const HomogenizedModel& ref) {
  const std::size_t n = est.box.size();
  std::vector<double> out(est.times.size() * n, 0.0);
  if (ref.flavor == HomFlavor::lattice) {
    std::vector<int> ti;
    for (double t : est.times) {
      if (std::abs(t - std::round(t)) > 1e-9) throw ConfigError("green_bound_check: lattice reference needs integer times");
      ti.push_back(static_cast<int>(std::lround(t)));
    }
    const auto tab = lattice_hom_green_table(ref, est.box, ti);
    return tab.values;
  }
  std::vector<int> c(static_cast<std::size_t>(est.box.dim()));
  std::vector<double> x(c.size());
  for (std::size_t k = 0; k < est.times.size(); ++k) {
    if (!(est.times[k] > 0.0)) continue;
    for (std::size_t s = 0; s < n; ++s) {
      est.box.centered_coords(s, c);
      for (std::size_t a = 0; a < c.size(); ++a) x[a] = c[a];
      out[k * n + s] = continuum_green(ref, x, est.times[k]);
    }
  }
  return out;
}

struct Diff {
  double value = 0.0;
  double se = 0.0;
};

// Largest |Δ^order (G_a - G_ref)| over directions at one site.
Diff site_difference(const LatticeBox& box, std::span<const double> g, std::span<const double> se,
                     std::span<const double> r, std::size_t s, int order) {
  const int d = box.dim();
  auto delta = [&](std::size_t i) { return g[i] - r[i]; };
  Diff best;
  if (order == 0) return {std::abs(delta(s)), se[s]};
  if (order == 1) {
    for (int j = 0; j < d; ++j) {
      const std::size_t p = box.plus(s, j);
      const double v = std::abs(delta(p) - delta(s));
      if (v >= best.value) best = {v, std::hypot(se[p], se[s])};
    }
    return best;
  }
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      const std::size_t pj = box.plus(s, j), pk = box.plus(s, k), pjk = box.plus(pj, k);
      const double v = std::abs(delta(pjk) - delta(pj) - delta(pk) + delta(s));
      if (v >= best.value)
        best = {v, std::sqrt(se[pjk] * se[pjk] + se[pj] * se[pj] + se[pk] * se[pk] + se[s] * se[s])};
    }
  return best;
}

// Decay rate of the tightest exponential envelope over (m, y) points: C is fixed by the highest
// point, and γ is the largest rate keeping every point at larger m under the line (the upper-hull
// edge leaving the highest vertex).
double upper_envelope_rate(std::vector<std::pair<double, double>> pts) {
  if (pts.size() < 2) return 0.0;
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> hull;
  for (const auto& p : pts) {
    if (!hull.empty() && hull.back().first == p.first) {
      if (p.second <= hull.back().second) continue;
      hull.pop_back();
    }
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      // Drop b when it lies on or below the chord a-p.
      if ((b.second - a.second) * (p.first - a.first) <= (p.second - a.second) * (b.first - a.first))
        hull.pop_back();
      else
        break;
    }
    hull.push_back(p);
  }
  std::size_t top = 0;
  for (std::size_t i = 1; i < hull.size(); ++i)
    if (hull[i].second > hull[top].second) top = i;
  if (top + 1 >= hull.size()) return 0.0;
  return -(hull[top + 1].second - hull[top].second) / (hull[top + 1].first - hull[top].first);
}

}  // namespace

BoundCheck green_bound_check(const GreenEstimate& est, const HomogenizedModel& ref, int order,
                             const BoundCheckOptions& opt) {
  if (order < 0 || order > 2) throw ConfigError("green_bound_check: order must be 0, 1 or 2");
  if (ref.d != est.box.dim()) throw DimensionError("green_bound_check: dimension mismatch");
  const int d = ref.d;
  const double Lam = est.spec.bounds.Lambda;
  const std::size_t n = est.box.size();
  const auto refv = reference_values(est, ref);
  BoundCheck bc;
  bc.order = order;
  bc.d = d;
  struct Point {
    double r, t, v, se;
  };
  std::vector<Point> pts;
  std::vector<int> c(static_cast<std::size_t>(d));
  for (std::size_t k = 0; k < est.times.size(); ++k) {
    const double t = est.times[k];
    const auto g = est.mean_at(k);
    const auto se = est.sem_at(k);
    const std::span<const double> r(refv.data() + k * n, n);
    Diff sup;
    for (std::size_t s = 0; s < n; ++s) {
      const auto dv = site_difference(est.box, g, se, r, s, order);
      bc.max_abs_diff = std::max(bc.max_abs_diff, dv.value);
      if (t < opt.t_min) continue;
      if (dv.value > sup.value) sup = dv;
      est.box.centered_coords(s, c);
      double r2 = 0.0;
      for (int v : c) r2 += static_cast<double>(v) * v;
      pts.push_back({std::sqrt(r2), t, dv.value, dv.se});
    }
    if (t >= opt.t_min) {
      bc.times.push_back(t);
      bc.sup_diff.push_back(sup.value);
      bc.sup_se.push_back(sup.se);
    }
  }

  DecayFit& f = bc.fit;
  const double base = d + order;
  if (opt.alpha) {
    f.alpha = *opt.alpha;
    f.band_lo = f.band_hi = f.alpha;
    f.verdict = f.alpha > 0.0 ? Verdict::pass : Verdict::fail;
  } else {
    std::vector<EnvelopeSample> ts;
    for (std::size_t i = 0; i < bc.times.size(); ++i) ts.push_back({0.0, bc.times[i], bc.sup_diff[i], bc.sup_se[i]});
    EnvelopeForm form;
    form.Lambda = Lam;
    form.base = base;
    form.fit_gamma = false;
    form.gamma = 0.0;
    form.noise_sigmas = opt.noise_sigmas;
    f = envelope_fit(ts, form);
    if (f.npoints < 4) return bc;
  }

  auto above = [&](const Point& p) { return p.v > 0.0 && p.v > opt.noise_sigmas * p.se; };
  if (opt.gamma) {
    f.gamma = *opt.gamma;
  } else {
    std::vector<std::pair<double, double>> my;
    for (const auto& p : pts) {
      if (!above(p)) continue;
      const double L = std::log(Lam * p.t + 1.0);
      my.emplace_back(envelope_spatial(p.r, p.t, Lam), std::log(p.v) + 0.5 * (base + f.alpha) * L);
    }
    f.gamma = upper_envelope_rate(std::move(my));
    if (f.gamma < 0.0) {
      f.note += (f.note.empty() ? "" : "; ");
      f.note += "fitted gamma negative, clamped to 0";
      f.gamma = 0.0;
    }
  }
  f.max_ratio = 0.0;
  for (const auto& p : pts) {
    if (!above(p)) continue;
    const double env = std::pow(Lam * p.t + 1.0, -0.5 * (base + f.alpha)) * std::exp(-f.gamma * envelope_spatial(p.r, p.t, Lam));
    f.max_ratio = std::max(f.max_ratio, p.v / env);
  }
  f.C = f.max_ratio;
  return bc;
}

HolderXReport holder_x_ratio(const GreenEstimate& est, const HomogenizedModel& ref, double delta, double gamma,
                             int radius, double t_min, double noise_sigmas) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("holder_x_ratio: delta must lie in (0, 1]");
  if (radius < 1) throw ConfigError("holder_x_ratio: radius must be positive");
  if (ref.d != est.box.dim()) throw DimensionError("holder_x_ratio: dimension mismatch");
  const int d = ref.d;
  for (int a = 0; a < d; ++a)
    if (2 * radius + 2 > est.box.side(a)) throw SizingError("holder_x_ratio: window wider than box");
  const double Lam = est.spec.bounds.Lambda;
  const std::size_t n = est.box.size();
  const auto refv = reference_values(est, ref);
  HolderXReport rep;
  std::vector<int> c(static_cast<std::size_t>(d)), c2(c.size());
  auto norm = [](const std::vector<int>& v) {
    double r2 = 0.0;
    for (int x : v) r2 += static_cast<double>(x) * x;
    return std::sqrt(r2);
  };
  std::vector<std::size_t> window;
  for (std::size_t s = 0; s < n; ++s) {
    est.box.centered_coords(s, c);
    if (std::all_of(c.begin(), c.end(), [&](int v) { return std::abs(v) <= radius; })) window.push_back(s);
  }
  for (std::size_t k = 0; k < est.times.size(); ++k) {
    const double t = est.times[k];
    if (t < t_min) continue;
    const auto g = est.mean_at(k);
    const auto se = est.sem_at(k);
    const std::span<const double> r(refv.data() + k * n, n);
    const double L = Lam * t + 1.0;
    const double tfac = std::pow(L, 0.5 * (d + 2.0 - delta));
    for (int j = 0; j < d; ++j) {
      auto d1 = [&](std::size_t s) {
        const std::size_t p = est.box.plus(s, j);
        return std::pair{(g[p] - r[p]) - (g[s] - r[s]), se[p] * se[p] + se[s] * se[s]};
      };
      for (std::size_t s : window) {
        est.box.centered_coords(s, c);
        const double rx = norm(c);
        const auto [v1, var1] = d1(s);
        const double env_x = std::exp(-gamma * envelope_spatial(rx, t, Lam)) / tfac;
        for (int a = 0; a < d; ++a)
          for (int shift = 1; shift <= 2 * radius; ++shift) {
            c2 = c;
            c2[static_cast<std::size_t>(a)] += shift;
            if (std::abs(c2[static_cast<std::size_t>(a)]) > radius) break;
            const double rx2 = norm(c2);
            const double q = (rx2 + 1.0) / (rx + 1.0);
            if (q < 0.5 || q > 2.0) continue;
            const auto [v2, var2] = d1(est.box.index(c2));
            const double diff = std::abs(v2 - v1);
            // Standard errors combine as if independent, as for the stencils above.
            const double sd = std::sqrt(var1 + var2);
            if (!(diff > 0.0) || diff <= noise_sigmas * sd) {
              ++rep.excluded;
              continue;
            }
            ++rep.pairs;
            // Both orderings of the pair are admissible, so the smaller envelope applies.
            const double env = std::min(env_x, std::exp(-gamma * envelope_spatial(rx2, t, Lam)) / tfac);
            const double ratio = diff / (std::pow(static_cast<double>(shift), 1.0 - delta) * env);
            if (ratio > rep.max_ratio) {
              rep.max_ratio = ratio;
              rep.t_at = t;
            }
          }
      }
    }
  }
  return rep;
}

double ratio_change(const BoundCheck& first, const BoundCheck& doubled) {
  if (!(first.fit.max_ratio > 0.0)) return std::numeric_limits<double>::infinity();
  return std::abs(doubled.fit.max_ratio / first.fit.max_ratio - 1.0);
}

bool ladder_nondecreasing(std::span<const BoundCheck> checks) {
  for (std::size_t k = 0; k + 1 < checks.size(); ++k)
    if (checks[k + 1].total_band_hi() < checks[k].total_band_lo()) return false;
  return true;
}

int rate_box_side(int d, double Lambda, double eps, double extent, double t_max) {
  (void)d;
  const double steps = t_max / (eps * eps);
  const double R = std::ceil(extent / eps) + std::ceil(8.5 * std::sqrt(2.0 * Lambda * steps + 1.0)) + 8.0;
  return static_cast<int>(std::bit_ceil(static_cast<unsigned>(2.0 * R + 2.0)));
}

RateReport rate_experiment(const EnvironmentSpec& spec, const Profile& f, const HomogenizedModel& model,
                           const RateOptions& opt) {
  spec.validate();
  if (opt.eps.empty()) throw ConfigError("rate: empty eps list");
  if (opt.times.empty()) throw ConfigError("rate: empty time grid");
  for (std::size_t k = 0; k < opt.eps.size(); ++k) {
    if (!(opt.eps[k] > 0.0 && opt.eps[k] <= 1.0)) throw ConfigError("rate: eps must lie in (0,1]");
    if (k > 0 && !(opt.eps[k] < opt.eps[k - 1])) throw ConfigError("rate: eps list must be strictly decreasing");
  }
  for (double t : opt.times)
    if (!(t > 0.0)) throw ConfigError("rate: times must be positive");
  if (model.d != spec.d) throw DimensionError("rate: model dimension mismatch");
  const auto cont = model.with_flavor(HomFlavor::continuum);
  const int d = spec.d;
  const double t_max = *std::max_element(opt.times.begin(), opt.times.end());
  RateReport rep;
  rep.model = cont;
  rep.eps = opt.eps;
  for (double eps : opt.eps) {
    std::vector<double> steps;
    for (double t : opt.times) {
      const double s = t / (eps * eps);
      if (spec.discrete_time() && std::abs(s - std::round(s)) > 1e-9)
        throw ConfigError("rate: t/eps^2 must be an integer in discrete time");
      steps.push_back(spec.discrete_time() ? std::round(s) : s);
    }
    const int side = rate_box_side(d, spec.bounds.Lambda, eps, opt.x_extent, t_max);
    LatticeBox box(std::vector<int>(static_cast<std::size_t>(d), side));
    McOptions mc = opt.mc;
    mc.initial = InitialData::profile(f, eps);
    const std::size_t N = spec.deterministic() ? std::min<std::size_t>(opt.N, 2) : opt.N;
    const auto est = green_mc_estimate(spec, box, steps, N, mc);

    std::vector<std::size_t> sites;
    std::vector<std::vector<double>> xs;
    std::vector<int> c(static_cast<std::size_t>(d));
    for (std::size_t s = 0; s < box.size(); ++s) {
      box.centered_coords(s, c);
      bool inside = true;
      std::vector<double> x(c.size());
      for (std::size_t a = 0; a < c.size(); ++a) {
        x[a] = eps * c[a];
        inside = inside && std::abs(x[a]) <= opt.x_extent + 1e-12;
      }
      if (!inside) continue;
      sites.push_back(s);
      xs.push_back(std::move(x));
    }
    double E = 0.0, E_se = 0.0, qerr = 0.0;
    for (std::size_t k = 0; k < opt.times.size(); ++k) {
      const auto uh = u_hom(cont, f, xs, opt.times[k]);
      const auto mean = est.mean_at(k);
      const auto sem = est.sem_at(k);
      for (std::size_t i = 0; i < sites.size(); ++i) {
        const double e = std::abs(mean[sites[i]] - uh[i].value);
        qerr = std::max(qerr, uh[i].error);
        if (e > E) {
          E = e;
          E_se = sem[sites[i]];
        }
      }
    }
    rep.E.push_back(E);
    rep.E_se.push_back(E_se);
    rep.quad_err.push_back(qerr);
    rep.box_side.push_back(side);
    rep.N.push_back(N);
    rep.noise_limited.push_back(E <= opt.noise_sigmas * E_se);
  }
  rep.monotone = true;
  for (std::size_t k = 0; k + 1 < rep.E.size(); ++k) {
    const double tol = opt.noise_sigmas * std::hypot(rep.E_se[k], rep.E_se[k + 1]) + rep.quad_err[k] + rep.quad_err[k + 1];
    if (rep.E[k + 1] > rep.E[k] + tol) rep.monotone = false;
  }
  std::vector<double> x, y, se;
  for (std::size_t k = 0; k < rep.E.size(); ++k)
    if (!rep.noise_limited[k]) {
      x.push_back(rep.eps[k]);
      y.push_back(rep.E[k]);
      se.push_back(rep.E_se[k]);
    }
  rep.fit = power_law_fit(x, y, se);
  if (!rep.monotone) {
    rep.verdict = Verdict::fail;
    rep.note = "E(eps) increases beyond its error bars";
  } else if (!rep.fit.ok || rep.fit.npoints < 3) {
    rep.verdict = Verdict::inconclusive;
    rep.note = "fewer than 3 eps above the noise floor";
  } else if (rep.fit.band_lo > 0.0) {
    rep.verdict = Verdict::pass;
  } else if (rep.fit.band_hi < 0.0) {
    rep.verdict = Verdict::fail;
    rep.note = "fitted rate negative";
  } else {
    rep.verdict = Verdict::inconclusive;
    rep.note = "rate band includes 0";
  }
  return rep;
}

}  // namespace parahom
