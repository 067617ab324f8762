#pragma once

#include <optional>
#include <span>
#include <vector>

#include "parahom/environment.hpp"
#include "parahom/fit.hpp"
#include "parahom/homogenized.hpp"
#include "parahom/parabolic.hpp"

namespace parahom {

struct BoundCheckOptions {
  double noise_sigmas = 3.0;
  double t_min = 1.0;  // earliest time entering the fits
  // Envelope parameters to reuse (for the horizon-doubling comparison); fitted when absent.
  std::optional<double> alpha;
  std::optional<double> gamma;
};

struct BoundCheck {
  int order = 0;
  DecayFit fit;                 // alpha = extra exponent α̂, gamma = γ̂, max_ratio over points above noise
  std::vector<double> times;    // temporal series of sup_x D(·,t)
  std::vector<double> sup_diff;
  std::vector<double> sup_se;
  double max_abs_diff = 0.0;    // max over all (x,t), noise included
  int d = 1;

  // Total decay exponent (d + order + α̂)/2 and its band.
  double total_exponent() const { return 0.5 * (d + order + fit.alpha); }
  double total_band_lo() const { return 0.5 * (d + order + fit.band_lo); }
  double total_band_hi() const { return 0.5 * (d + order + fit.band_hi); }
};

// D(x,t) = |Δ^order G_a - Δ^order G_ref| on the estimate's box and times (forward differences along
// every axis for order 1, every ordered pair for order 2). The reference is the lattice kernel or
// the continuum Gaussian sampled at lattice points.
BoundCheck green_bound_check(const GreenEstimate& est, const HomogenizedModel& ref, int order,
                             const BoundCheckOptions& opt = {});

// Max-ratio relative change between a run and its horizon-doubled rerun, evaluated with the
// first run's (α̂, γ̂).
double ratio_change(const BoundCheck& first, const BoundCheck& doubled);

struct HolderXReport {
  double max_ratio = 0.0;  // over pairs whose difference clears the noise floor
  double t_at = -1.0;      // time of the maximizing pair
  std::size_t pairs = 0;   // pairs entering the maximum
  std::size_t excluded = 0;
};

// Spatial Hölder probe for first differences: with D1 = ∇(G_a - G_ref), the max over t >= t_min
// and pairs x' = x + s e_j inside |x_i| <= radius with 1/2 <= (|x'|+1)/(|x|+1) <= 2 of
// |D1_j(x') - D1_j(x)| / (|x'-x|^{1-δ} (Λt+1)^{-(d+2-δ)/2} exp(-γ min{|x|, |x|²/(Λt+1)})).
HolderXReport holder_x_ratio(const GreenEstimate& est, const HomogenizedModel& ref, double delta, double gamma,
                             int radius, double t_min = 1.0, double noise_sigmas = 3.0);

// Exponent ladder across orders is nondecreasing within the fitted bands.
bool ladder_nondecreasing(std::span<const BoundCheck> checks);

struct RateOptions {
  std::vector<double> eps;     // strictly decreasing in (0,1]
  std::vector<double> times;   // t grid; t/ε² must be an integer for discrete time
  double x_extent = 2.0;       // sup over lattice points with |εx_i| <= x_extent
  std::size_t N = 100;
  McOptions mc;
  double noise_sigmas = 3.0;
};

struct RateReport {
  std::vector<double> eps;
  std::vector<double> E;        // sup error per ε
  std::vector<double> E_se;     // standard error at the maximizing point
  std::vector<double> quad_err; // u_hom quadrature error bound per ε
  std::vector<int> box_side;
  std::vector<bool> noise_limited;  // E < noise_sigmas · se
  std::vector<std::size_t> N;
  PowerLawFit fit;              // E ≈ c ε^α over the ε above the noise floor
  bool monotone = false;        // nonincreasing within 3 combined standard errors
  HomogenizedModel model;
  Verdict verdict = Verdict::inconclusive;
  std::string note;
};

RateReport rate_experiment(const EnvironmentSpec& spec, const Profile& f, const HomogenizedModel& model,
                           const RateOptions& opt);

// Box side holding |εx| <= extent plus the kernel spread over t_max/ε² steps.
int rate_box_side(int d, double Lambda, double eps, double extent, double t_max);

}  // namespace parahom
