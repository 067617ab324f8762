#pragma once

#include <span>
#include <vector>

#include "parahom/corrector.hpp"
#include "parahom/fit.hpp"
#include "parahom/lattice.hpp"
#include "parahom/parabolic.hpp"

namespace parahom {

enum class HomFlavor { lattice, continuum };
const char* to_string(HomFlavor f) noexcept;

// Constant-coefficient reference problem with a real symmetric positive-definite matrix.
struct HomogenizedModel {
  int d = 1;
  std::vector<double> a;  // d x d row-major
  HomFlavor flavor = HomFlavor::continuum;

  // Throws EllipticityError unless symmetric to 1e-10 and positive definite.
  static HomogenizedModel make(int d, std::vector<double> a, HomFlavor flavor);
  static HomogenizedModel scalar(int d, double kappa, HomFlavor flavor);
  // Real part of the Hermitian part of q; checks λ - kσ <= a <= Λ + kσ.
  static HomogenizedModel from_effective(const EffectiveMatrix& q, HomFlavor flavor, const EllipticityBounds& b,
                                         double sigmas = 3.0);

  HomogenizedModel with_flavor(HomFlavor f) const;
  std::pair<double, double> eigen_range() const;
  double quad(std::span<const double> xi) const;            // ξ·aξ
  double lattice_symbol(std::span<const double> zeta) const;  // e(ζ)* a e(ζ)
};

// G^lattice on a periodic box from the closed-form spatial symbol (1 - e* a e)^t.
struct LatticeGreenTable {
  LatticeBox box;
  std::vector<int> times;
  std::vector<double> values;  // [time][site]

  double at(std::span<const int> x, std::size_t ti) const { return values[ti * box.size() + box.index(x)]; }
  std::span<const double> record(std::size_t ti) const { return {values.data() + ti * box.size(), box.size()}; }
};

LatticeGreenTable lattice_hom_green_table(const HomogenizedModel& m, const LatticeBox& box,
                                          std::span<const int> times);
// Single point, box-average over the discrete frequencies.
double lattice_hom_green(const HomogenizedModel& m, const LatticeBox& box, std::span<const int> x, int t);

// exp(-x·a⁻¹x/(4t)) / ((4πt)^{d/2} sqrt(det a)).
double continuum_green(const HomogenizedModel& m, std::span<const double> x, double t);

struct QuadratureValue {
  double value = 0.0;
  double error = 0.0;  // last panel-doubling change plus truncation estimate
  int panels = 0;
};

// Inverse Fourier transform of f̂(ξ)exp(-ξ·aξ t) by tensor trapezoid on [-Ξ,Ξ]^d.
std::vector<QuadratureValue> u_hom(const HomogenizedModel& m, const Profile& f,
                                   const std::vector<std::vector<double>>& x, double t, double rel_tol = 1e-8);
QuadratureValue u_hom(const HomogenizedModel& m, const Profile& f, std::span<const double> x, double t,
                      double rel_tol = 1e-8);

struct IdentityCheck {
  double lhs_re = 0.0, lhs_im = 0.0;
  double rhs = 0.0;
  double residual = 0.0;           // relative, at the final panel count
  int panels = 0;
  std::vector<double> residuals;   // one per doubling, starting at the initial panel count
  std::vector<int> panel_counts;
};

// Contour integral over Im η ∈ [-π/ε², π/ε²] at fixed Re η against (1 - κ|e(εξ)|²)^{t/ε²}.
// Panels double from `panels` until the value changes by less than `tol` (relative).
IdentityCheck identity_check_P2(double kappa, std::span<const double> xi, double t, double eps, double re_eta,
                                int panels = 64, double tol = 1e-13, int max_panels = 1 << 22);

struct LatticeContinuumReport {
  DecayFit order[3];        // alpha = fitted decay exponent of |Δ^k(G^lattice - G_cont)|(0,t)
  double threshold[3] = {};  // (d+1+k)/2 - slack
  bool ladder_monotone = false;
  std::vector<int> times;
  std::vector<double> diff[3];
  Verdict verdict = Verdict::inconclusive;
};

// Differences at x = 0 over t ∈ [t_min, t_max]; throws FitError below 16 times.
LatticeContinuumReport lattice_vs_continuum(const HomogenizedModel& m, int t_min, int t_max, double slack = 0.1);

}  // namespace parahom
