#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "parahom/environment.hpp"
#include "parahom/lattice.hpp"

namespace parahom {

enum class ProfileKind { gaussian, compact_bump };
const char* to_string(ProfileKind k) noexcept;
ProfileKind profile_kind_from_string(const std::string& s);

// Separable profile f(z) = A Π_j β(z_j / w):
// gaussian β(s) = exp(-s²/2); compact_bump β(s) = exp(-1/(1-s²)) for |s| < 1.
struct Profile {
  ProfileKind kind = ProfileKind::gaussian;
  double width = 1.0;
  double amplitude = 1.0;

  double value(std::span<const double> z) const;
  // f̂(ξ) = ∫ f(z) e^{-iξ·z} dz (real because f is even).
  double fourier(std::span<const double> xi) const;
  // |ξ| beyond which |f̂| per axis is below `tol` relative to its peak.
  double frequency_cutoff(double tol) const;
};

// Lattice data h(x) directly, or h(x) = f(εx) on centered coordinates.
class InitialData {
 public:
  static InitialData lattice(ScalarField h);
  static InitialData profile(Profile f, double eps);
  static InitialData delta();

  ScalarField realize(const LatticeBox& box) const;

 private:
  enum class Kind { lattice, profile, delta } kind_ = Kind::delta;
  ScalarField h_;
  Profile f_;
  double eps_ = 1.0;
};

ScalarField step_discrete(const ScalarField& u, const CoefficientSlice& a);
std::vector<ScalarField> evolve_discrete(const InitialData& h, const CoefficientPath& path,
                                         std::span<const int> snapshot_times);

struct ContinuousEvolution {
  std::vector<ScalarField> snapshots;
  std::size_t substeps = 0;  // total RK4 substeps taken
};
// RK4 substeps of at most safety/(4dΛ) inside each piecewise-constant cell.
ContinuousEvolution evolve_continuous(const InitialData& h, const CoefficientPath& path,
                                      std::span<const double> times, double safety = 0.25);

struct McOptions {
  std::uint64_t stream_offset = 0;
  std::size_t batches = 16;
  std::size_t chunk = 0;  // samples per parallel chunk, 0 = automatic
  double rk_safety = 0.25;
  std::optional<InitialData> initial;  // default δ_0
};

// Means and standard errors of the averaged solution (G_a for δ_0 initial data).
struct GreenEstimate {
  LatticeBox box;
  std::vector<double> times;
  std::vector<double> mean;    // [time][site]
  std::vector<double> sem;  // standard errors, [time][site]
  std::vector<double> batch_mean;  // [batch][time][site], contiguous sample blocks
  std::size_t batches = 0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  EnvironmentSpec spec;

  std::size_t record_size() const noexcept { return box.size(); }
  std::span<const double> mean_at(std::size_t ti) const { return {mean.data() + ti * box.size(), box.size()}; }
  std::span<const double> sem_at(std::size_t ti) const {
    return {sem.data() + ti * box.size(), box.size()};
  }
  std::span<const double> batch_at(std::size_t b, std::size_t ti) const {
    return {batch_mean.data() + (b * times.size() + ti) * box.size(), box.size()};
  }
};

GreenEstimate green_mc_estimate(const EnvironmentSpec& spec, const LatticeBox& box,
                                std::span<const double> times, std::size_t N, const McOptions& opt = {});

struct ModeDecay {
  std::vector<double> xi;
  std::vector<double> t;
  std::vector<cplx> G;            // Ĝ_a(ξ,t) = Σ_x mean(x,t) e^{iξ·x}
  std::vector<double> G_stderr;   // jackknife over batches, |Ĝ|
  double slope = 0.0;             // d log|Ĝ| / dt over the fit window
  double q_direct = 0.0;
  double q_stderr = 0.0;
  std::size_t window_points = 0;
};

struct ModeFitOptions {
  double t_min = 0.0;
  double t_max = 1e300;
};

std::vector<ModeDecay> fourier_mode_decay(const GreenEstimate& est, const std::vector<std::vector<double>>& modes,
                                          const ModeFitOptions& opt = {});

namespace serial {
// Single-threaded sample loop with the same fixed-order reduction.
GreenEstimate green_mc_estimate(const EnvironmentSpec& spec, const LatticeBox& box,
                                std::span<const double> times, std::size_t N, const McOptions& opt = {});
}

}  // namespace parahom
