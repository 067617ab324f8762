#include "parahom/fit.hpp"

#include <algorithm>
#include <cmath>

#include "parahom/stats.hpp"

namespace parahom {

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::fail: return "fail";
  }
  return "unknown";
}

Verdict worst(Verdict a, Verdict b) noexcept {
  return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

double envelope_spatial(double r, double t, double Lambda) noexcept {
  return std::min(r, r * r / (Lambda * t + 1.0));
}

DecayFit envelope_fit(std::span<const EnvelopeSample> samples, const EnvelopeForm& form) {
  DecayFit out;
  std::vector<const EnvelopeSample*> use;
  double t_noise = -1.0;
  for (const auto& s : samples) {
    const bool above = s.value > 0.0 && std::isfinite(s.value) && s.value > form.noise_sigmas * s.sem;
    if (above) {
      use.push_back(&s);
    } else {
      ++out.excluded;
      if (s.value != 0.0 || s.sem > 0.0)
        if (t_noise < 0.0 || s.t < t_noise) t_noise = s.t;
    }
  }
  out.noise_onset = t_noise;
  out.npoints = use.size();
  if (use.size() < 4) {
    out.verdict = Verdict::inconclusive;
    out.note = use.empty() ? "degenerate: no usable points" : "fewer than 4 points above noise floor";
    return out;
  }
  double mmin = 1e300, mmax = -1e300;
  out.t_lo = 1e300;
  out.t_hi = -1e300;
  for (auto* s : use) {
    const double m = envelope_spatial(s->r, s->t, form.Lambda);
    mmin = std::min(mmin, m);
    mmax = std::max(mmax, m);
    out.t_lo = std::min(out.t_lo, s->t);
    out.t_hi = std::max(out.t_hi, s->t);
  }
  const bool fit_gamma = form.fit_gamma && mmax > mmin;
  const std::size_t p = fit_gamma ? 3 : 2;
  std::vector<double> X, y, w;
  X.reserve(use.size() * p);
  for (auto* s : use) {
    const double L = std::log(form.Lambda * s->t + 1.0);
    const double m = envelope_spatial(s->r, s->t, form.Lambda);
    double z = std::log(s->value) + 0.5 * form.base * L;
    if (!fit_gamma) z += (form.fit_gamma ? 0.0 : form.gamma) * m;
    X.push_back(1.0);
    X.push_back(-0.5 * L);
    if (fit_gamma) X.push_back(-m);
    y.push_back(z);
    w.push_back(s->sem > 0.0 ? (s->value / s->sem) * (s->value / s->sem) : 1.0);
  }
  auto fit = weighted_least_squares(X, y, w, p, true);
  if (!fit.ok) {
    out.verdict = Verdict::inconclusive;
    out.note = "degenerate: singular design";
    return out;
  }
  out.C = std::exp(fit.beta[0]);
  out.alpha = fit.beta[1];
  out.gamma = fit_gamma ? fit.beta[2] : (form.fit_gamma ? 0.0 : form.gamma);
  double wsum = 0.0;
  for (double v : w) wsum += v;
  out.residual = std::sqrt(fit.rss / wsum);
  const double half = t95(use.size() - p) * fit.se(1);
  out.band_lo = out.alpha - half;
  out.band_hi = out.alpha + half;
  if (out.band_lo > 0.0)
    out.verdict = Verdict::pass;
  else if (out.band_hi < 0.0)
    out.verdict = Verdict::fail;
  else
    out.verdict = Verdict::inconclusive;
  return out;
}

PowerLawFit power_law_fit(std::span<const double> x, std::span<const double> y, std::span<const double> se) {
  PowerLawFit out;
  std::vector<double> X, z, w;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0) || !(x[i] > 0.0)) continue;
    X.push_back(1.0);
    X.push_back(std::log(x[i]));
    z.push_back(std::log(y[i]));
    const double s = i < se.size() ? se[i] : 0.0;
    w.push_back(s > 0.0 ? (y[i] / s) * (y[i] / s) : 1.0);
  }
  out.npoints = z.size();
  if (z.size() < 2) return out;
  auto fit = weighted_least_squares(X, z, w, 2, true);
  if (!fit.ok) return out;
  out.log_c = fit.beta[0];
  out.exponent = fit.beta[1];
  out.se = fit.se(1);
  const double half = z.size() > 2 ? t95(z.size() - 2) * out.se : std::numeric_limits<double>::infinity();
  out.band_lo = out.exponent - half;
  out.band_hi = out.exponent + half;
  out.ok = true;
  return out;
}

}  // namespace parahom
