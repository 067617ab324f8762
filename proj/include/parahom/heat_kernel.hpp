#pragma once

#include <optional>
#include <span>
#include <vector>

#include "parahom/fit.hpp"
#include "parahom/lattice.hpp"

namespace parahom {

enum class KernelFlavor { discrete_time, continuous_time };

// G_Λ(x,t) on the window |x_i| <= radius of a periodic box, one record per time.
struct KernelTable {
  LatticeBox box;
  KernelFlavor flavor = KernelFlavor::discrete_time;
  double Lambda = 0.0;
  int radius = 0;
  std::vector<double> times;
  std::vector<double> values;      // [time][window site], window is (2R+1)^d row-major
  std::vector<double> total_mass;  // full-box mass per recorded time
  double boundary_mass = 0.0;      // mass on the outermost layer at the last time

  int dim() const noexcept { return box.dim(); }
  int window_side() const noexcept { return 2 * radius + 1; }
  std::size_t window_size() const noexcept;
  // 0 outside the window.
  double at(std::span<const int> x, std::size_t time_index) const;
  std::span<const double> record(std::size_t time_index) const;
  void window_coords(std::size_t w, std::span<int> x) const;
};

constexpr double kBoundaryMassThreshold = 1e-14;

// Radius rule for the stored window.
int default_kernel_radius(const LatticeBox& box, double Lambda, double T);
// Smallest power-of-two side whose boundary mass at horizon T is negligible.
int kernel_box_side(int d, double Lambda, double T);

// Time-stepped G(t+1) = G - Λ∇*∇G from δ_0, recorded at t = 0..T.
KernelTable discrete_kernel(int d, double Lambda, const LatticeBox& box, int T,
                            std::optional<int> radius = std::nullopt);

// Spectral exp(-Λ|e(ζ)|² t) inverted on the box frequencies.
KernelTable continuous_kernel(int d, double Lambda, const LatticeBox& box, std::span<const double> times,
                              std::optional<int> radius = std::nullopt);

// Smallest C with G <= C (Λt+1)^{-d/2} exp(-min{|x|,|x|²/(Λt+1)}/Cd); alpha holds
// the fitted slope of log G(0,t) against log(Λt+1) over Λt >= 1.
DecayFit envelope_check(const KernelTable& table, double Cd_candidate);

namespace serial {
KernelTable discrete_kernel(int d, double Lambda, const LatticeBox& box, int T,
                            std::optional<int> radius = std::nullopt);
}

}  // namespace parahom
