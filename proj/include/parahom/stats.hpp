#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace parahom {

// Welford accumulator. Fed in a fixed order, results are bitwise reproducible.
struct RunningStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) noexcept {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  double variance() const noexcept { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_mean() const noexcept { return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

// Vectorized Welford over a fixed-length record.
class RunningFieldStats {
 public:
  explicit RunningFieldStats(std::size_t len = 0) : mean_(len, 0.0), m2_(len, 0.0) {}
  void push(std::span<const double> x);
  std::size_t count() const noexcept { return n_; }
  const std::vector<double>& mean() const noexcept { return mean_; }
  std::vector<double> stderr_mean() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> mean_, m2_;
};

struct LinearFit {
  std::vector<double> beta;
  std::vector<double> cov;  // p x p, row-major
  double rss = 0.0;         // weighted residual sum of squares
  std::size_t n = 0;
  std::size_t p = 0;
  bool ok = false;

  double se(std::size_t i) const { return std::sqrt(std::max(cov[i * p + i], 0.0)); }
};

// Weighted least squares y ≈ X beta, X row-major (n x p). Covariance is
// s² (XᵀWX)⁻¹ with s² = RSS/(n-p) (or (XᵀWX)⁻¹ alone when `scale_by_residual` is false).
LinearFit weighted_least_squares(std::span<const double> X, std::span<const double> y,
                                 std::span<const double> w, std::size_t p, bool scale_by_residual = true);

// Two-sided 95% Student-t multiplier for `dof` degrees of freedom (normal when dof is large).
double t95(std::size_t dof);

// Mean with the first element as shift, so constant input is reproduced exactly.
double shifted_mean(std::span<const double> v);

}  // namespace parahom
