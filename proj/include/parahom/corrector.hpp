#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "parahom/environment.hpp"
#include "parahom/fit.hpp"
#include "parahom/heat_kernel.hpp"
#include "parahom/lattice.hpp"

namespace parahom {

struct FrequencyPoint {
  std::vector<double> xi;
  cplx eta{1.0, 0.0};
};

// e_j(ξ) = e^{-iξ_j} - 1.
std::vector<cplx> phase_vector(std::span<const double> xi);
double phase_norm2(std::span<const double> xi);

// Periodic space-time box; fields are stored [component][time][site].
struct SpaceTimeGrid {
  LatticeBox space;
  int steps = 1;
  double dt = 1.0;  // cell width; 1 for discrete time
  bool continuous = false;

  int dim() const noexcept { return space.dim(); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(steps) * space.size(); }
  std::vector<int> fft_dims() const;
};

// (∂_{j,ξ}ψ)(x,t) = e^{-iξ_j} ψ(x+e_j,t) - ψ(x,t); output d x size.
std::vector<cplx> twisted_gradient(const SpaceTimeGrid& grid, std::span<const cplx> psi,
                                   std::span<const double> xi);
// Σ_j e^{iξ_j} g_j(x-e_j,t) - g_j(x,t); adjoint of twisted_gradient.
std::vector<cplx> twisted_divergence(const SpaceTimeGrid& grid, std::span<const cplx> g,
                                     std::span<const double> xi);

// T_{ξ,η} on a space-time grid, held as a d x d transfer matrix per space-time frequency.
class ResolventOperator {
 public:
  // Closed-form symbol: discrete time Λ ē eᵀ / (e^{η+iθ} - 1 + Λ|e|²) with e = e(ζ-ξ);
  // continuous time uses the cell-averaged (piecewise-constant Galerkin) form of the same kernel.
  static ResolventOperator from_symbol(const SpaceTimeGrid& grid, std::span<const double> xi, cplx eta,
                                       double Lambda);
  // Assembled from a tabulated kernel: differences of G_Λ, phase e^{-ix·ξ}, damping e^{-η(t+1)}.
  // Throws when the discarded tail exceeds `tail_tol`.
  static ResolventOperator from_kernel(const SpaceTimeGrid& grid, std::span<const double> xi, cplx eta,
                                       const KernelTable& kernel, double tail_tol);

  // In place on a d x size field; `project` removes the space-time mean (P).
  void apply(std::span<cplx> g, bool project) const;
  // Symbol at a flat frequency index (row-major d x d).
  std::span<const cplx> transfer(std::size_t f) const;

  const SpaceTimeGrid& grid() const noexcept { return grid_; }
  double Lambda() const noexcept { return Lambda_; }
  double tail_bound() const noexcept { return tail_bound_; }
  const std::vector<double>& xi() const noexcept { return xi_; }
  cplx eta() const noexcept { return eta_; }

 private:
  SpaceTimeGrid grid_;
  std::vector<double> xi_;
  cplx eta_{};
  double Lambda_ = 0.0;
  double tail_bound_ = 0.0;
  std::vector<cplx> transfer_;  // [frequency][d*d]
};

// Horizon rule ceil(8 / Re η), capped.
int kernel_horizon(cplx eta, int cap = 1 << 16);
// Upper bound on the discarded tail Λ Σ_{t>=T} e^{-Re η (t+1)} ‖∇∇*G_Λ(t)‖.
double kernel_tail_bound(cplx eta, int T);

std::vector<cplx> apply_T(const SpaceTimeGrid& grid, std::span<const cplx> g, std::span<const double> xi,
                          cplx eta, const KernelTable& kernel, double tail_tol = 1e-10);

struct NeumannOptions {
  double tol = 1e-10;  // absolute, in box RMS norm, relative to |v|
  int max_iter = 1000;
};

struct CorrectorField {
  SpaceTimeGrid grid;
  std::vector<cplx> psi;  // d x size, realizes ∂_ξΦ v
  std::vector<double> xi;
  cplx eta{};
  std::vector<cplx> v;
  int iterations = 0;
  double residual = 0.0;
  double max_ratio = 0.0;            // max successive update-norm ratio
  std::vector<double> update_norms;  // ‖ψ_{k+1} - ψ_k‖ per iteration
  std::vector<cplx> q_partial;       // <a(v + ψ_k)> per iteration, d entries each

  double norm() const;
};

CorrectorField neumann_solve(const CoefficientPath& path, const ResolventOperator& T, std::span<const cplx> v,
                             const NeumannOptions& opt = {});

struct CorrectorConfig {
  LatticeBox space;
  int time_steps = 64;
  NeumannOptions neumann;
  std::uint64_t stream_offset = 0;
  std::size_t chunk = 0;
};

struct EffectiveMatrix {
  int d = 1;
  FrequencyPoint point;
  std::vector<cplx> q;        // d x d row-major
  std::vector<double> se_re;  // per entry
  std::vector<double> se_im;
  std::size_t N = 0;
  int max_iterations = 0;
  double max_residual = 0.0;
  double max_ratio = 0.0;
  std::vector<cplx> samples;  // [sample][d*d], kept for common-random-number post-processing
  double fit_residual = 0.0;  // extrapolation only

  double sigma() const;  // largest per-entry standard error (|re|,|im| combined)
  // Extreme eigenvalues of (q + q^H)/2.
  std::pair<double, double> hermitian_range() const;
};

// q at several frequency points using the same environment samples for each point.
std::vector<EffectiveMatrix> effective_matrices(const EnvironmentSpec& spec, const CorrectorConfig& cfg,
                                                const std::vector<FrequencyPoint>& points, std::size_t N);
EffectiveMatrix effective_matrix(const EnvironmentSpec& spec, const CorrectorConfig& cfg,
                                 const FrequencyPoint& point, std::size_t N);

// η_k = Λ 2^{-k}, k = k_min..k_max.
std::vector<double> eta_ladder(double Lambda, int k_min, int k_max);

struct Extrapolation {
  EffectiveMatrix q00;  // intercept; se_re/se_im combine MC and fit uncertainty
  std::vector<EffectiveMatrix> rungs;
  std::vector<double> etas;
};

// Linear fit of q(0,η_k) against sqrt(η_k); the intercept estimates q(0,0).
Extrapolation extrapolate_q00(const EnvironmentSpec& spec, const CorrectorConfig& cfg,
                              const std::vector<double>& etas, std::size_t N);

struct HolderOffset {
  std::vector<double> dxi;  // empty = no ξ offset
  cplx deta{0.0, 0.0};
};

struct HolderProbe {
  DecayFit fit;
  std::vector<double> scale;  // |Δξ| or |Δη/Λ|^{1/2}
  std::vector<double> diff;   // ‖q(p') - q(p)‖ (Frobenius)
  std::vector<double> diff_se;
};

HolderProbe holder_probe(const EnvironmentSpec& spec, const CorrectorConfig& cfg, const FrequencyPoint& base,
                         const std::vector<HolderOffset>& offsets, std::size_t N);

}  // namespace parahom
