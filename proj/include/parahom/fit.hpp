#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace parahom {

enum class Verdict { pass = 0, inconclusive = 2, fail = 3 };
const char* to_string(Verdict v) noexcept;
Verdict worst(Verdict a, Verdict b) noexcept;

struct DecayFit {
  double C = 0.0;
  double gamma = 0.0;
  double alpha = 0.0;
  double t_lo = 0.0, t_hi = 0.0;  // fit window
  double residual = 0.0;          // weighted RMS residual in log space
  double band_lo = 0.0, band_hi = 0.0;  // 95% band on alpha
  std::size_t npoints = 0;
  std::size_t excluded = 0;       // points dropped at the noise floor
  double noise_onset = -1.0;      // first t where noise dominates, -1 if none
  double max_ratio = 0.0;         // max of value / envelope, when computed
  Verdict verdict = Verdict::inconclusive;
  std::string note;
};

struct EnvelopeSample {
  double r = 0.0;  // |x|
  double t = 0.0;
  double value = 0.0;
  double sem = 0.0;  // standard error
};

// value ≈ C (Λt+1)^{-(base+α)/2} exp(-γ min{r, r²/(Λt+1)}).
struct EnvelopeForm {
  double Lambda = 1.0;
  double base = 0.0;
  bool fit_gamma = true;
  double gamma = 0.0;  // used when fit_gamma is false
  double noise_sigmas = 3.0;
};

double envelope_spatial(double r, double t, double Lambda) noexcept;

// Weighted least squares in log space. γ enters linearly, so it is solved jointly
// with (log C, α); the result is the residual minimizer over γ.
DecayFit envelope_fit(std::span<const EnvelopeSample> samples, const EnvelopeForm& form);

struct PowerLawFit {
  double log_c = 0.0;
  double exponent = 0.0;
  double se = 0.0;
  double band_lo = 0.0, band_hi = 0.0;
  std::size_t npoints = 0;
  bool ok = false;
};

// y ≈ c x^p in log space with weights (y/se)² (unit weights when se is zero).
PowerLawFit power_law_fit(std::span<const double> x, std::span<const double> y, std::span<const double> se);

}  // namespace parahom
