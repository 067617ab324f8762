#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parahom/lattice.hpp"

namespace parahom {

enum class EnvironmentKind { constant, iid_bernoulli, iid_general, langevin_field };
const char* to_string(EnvironmentKind k) noexcept;
EnvironmentKind environment_kind_from_string(const std::string& s);

// Site laws for iid-general.
enum class SiteFamily { point_mass, uniform_scalar, uniform_diagonal };
const char* to_string(SiteFamily f) noexcept;
SiteFamily site_family_from_string(const std::string& s);

enum class PotentialKind { quadratic, convex_sqrt };

// V(z) = a/2 |z|² (+ eps Σ_j sqrt(1+z_j²) for convex_sqrt), so a <= V'' <= a + eps.
struct Potential {
  PotentialKind kind = PotentialKind::quadratic;
  double a = 1.0;
  double eps = 0.0;

  double derivative(double z) const noexcept;
  double curvature_lo() const noexcept { return a; }
  double curvature_hi() const noexcept { return kind == PotentialKind::quadratic ? a : a + eps; }
};

// ã(s) = κ (c0 + c1 tanh s) I.
struct CoefficientMap {
  double kappa = 1.0;
  double c0 = 1.0;
  double c1 = 0.5;

  double operator()(double s) const noexcept;
  double lambda() const noexcept { return kappa * (c0 - c1); }
  double Lambda() const noexcept { return kappa * (c0 + c1); }
  double derivative_bound() const noexcept { return kappa * c1; }
};

struct LangevinSpec {
  double mass = 1.0;
  Potential potential;
  CoefficientMap coeff;
  double dt = 0.01;
  double burn_in = 10.0;
  double grid_spacing = 0.5;  // coefficient storage step, piecewise constant between points
  int box_side = 16;

  void validate(int d) const;
};

struct EnvironmentSpec {
  EnvironmentKind kind = EnvironmentKind::constant;
  int d = 1;
  EllipticityBounds bounds;
  std::uint64_t seed = 0;
  double kappa = 0.125;
  double gamma = 0.0;
  SiteFamily family = SiteFamily::point_mass;
  LangevinSpec langevin;

  static EnvironmentSpec constant(int d, double kappa, std::uint64_t seed = 0);
  static EnvironmentSpec bernoulli(int d, double kappa, double gamma, std::uint64_t seed);
  static EnvironmentSpec general(int d, SiteFamily family, double lambda, double Lambda, std::uint64_t seed);
  static EnvironmentSpec langevin_field(int d, const LangevinSpec& ls, std::uint64_t seed);

  bool discrete_time() const noexcept { return kind != EnvironmentKind::langevin_field; }
  // Deterministic environments need a single Monte Carlo sample.
  bool deterministic() const noexcept;
  // Throws ConfigError / StabilityError / EllipticityError.
  void validate() const;
  // <a> as a scalar multiple of the identity, where known in closed form.
  double mean_scalar() const;
};

// a(x,t) on a periodic space-time box; slice k covers [times[k], times[k] + step).
struct CoefficientPath {
  LatticeBox box;
  std::vector<double> times;
  double step = 1.0;
  bool continuous = false;
  std::vector<CoefficientSlice> slices;
  EllipticityBounds bounds;
  EnvironmentKind kind = EnvironmentKind::constant;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t steps() const noexcept { return slices.size(); }
  const CoefficientSlice& slice(std::size_t k) const { return slices.at(k); }
  double horizon() const noexcept { return static_cast<double>(slices.size()) * step; }
};

// φ(x,t) on Q_L, [time][site].
struct FieldPath {
  LatticeBox box;
  std::vector<double> times;
  std::vector<double> values;

  std::span<const double> at(std::size_t k) const {
    return {values.data() + k * box.size(), box.size()};
  }
};

CoefficientPath sample_constant(const EnvironmentSpec& spec, const LatticeBox& box, int T);
CoefficientPath sample_iid_bernoulli(const EnvironmentSpec& spec, const LatticeBox& box, int T,
                                     std::uint64_t stream = 0);
CoefficientPath sample_iid_general(const EnvironmentSpec& spec, const LatticeBox& box, int T,
                                   std::uint64_t stream = 0);

// Exact Gaussian draw for quadratic V (covariance (a_V∇*∇+m²)⁻¹), else burn-in from 0.
ScalarField gibbs_initial(const LangevinSpec& spec, const LatticeBox& box, std::uint64_t seed,
                          std::uint64_t stream = 0);
// Euler-Maruyama for dφ = -½[∇*V'(∇φ) + m²φ]dt + dB, recorded every grid_spacing.
FieldPath langevin_path(const LangevinSpec& spec, const ScalarField& init, double horizon, std::uint64_t seed,
                        std::uint64_t stream = 0, double record_every = 0.0);
CoefficientPath coefficients_of_field(const FieldPath& path, const CoefficientMap& map,
                                      const EllipticityBounds& bounds, double step);

// Dispatch on spec.kind. `horizon` is a step count for discrete time, a duration otherwise.
CoefficientPath sample_path(const EnvironmentSpec& spec, const LatticeBox& box, double horizon,
                            std::uint64_t stream);

// Exact stationary single-site variance and lag-1 covariance for quadratic V on the box.
struct GaussianCovariance {
  double variance = 0.0;
  double lag1 = 0.0;
};
GaussianCovariance exact_gibbs_covariance(const LangevinSpec& spec, const LatticeBox& box);
// Same quantities for the Euler-Maruyama chain at step dt (its exact stationary law).
GaussianCovariance euler_maruyama_covariance(const LangevinSpec& spec, const LatticeBox& box, double dt);

}  // namespace parahom

namespace parahom {

// Per-sample site averages of φ(x)² and φ(x)φ(x+e_1) after relaxing an Euler-Maruyama chain
// (step `dt`) from an exact Gibbs draw; `records` measurements spaced `record_every` apart.
struct FieldMoments {
  double variance = 0.0, variance_se = 0.0;
  double lag1 = 0.0, lag1_se = 0.0;
  std::size_t samples = 0;
};

FieldMoments langevin_moments(const LangevinSpec& spec, const LatticeBox& box, double dt, std::size_t samples,
                              double relax, int records, double record_every, std::uint64_t seed,
                              std::uint64_t stream_offset = 0);

}  // namespace parahom
