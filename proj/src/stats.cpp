#include "parahom/stats.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "parahom/error.hpp"

namespace parahom {

void RunningFieldStats::push(std::span<const double> x) {
  if (x.size() != mean_.size()) throw DimensionError("RunningFieldStats: record length mismatch");
  ++n_;
  const double inv = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double delta = x[i] - mean_[i];
    mean_[i] += delta * inv;
    m2_[i] += delta * (x[i] - mean_[i]);
  }
}

std::vector<double> RunningFieldStats::stderr_mean() const {
  std::vector<double> se(mean_.size(), 0.0);
  if (n_ < 2) return se;
  const double nn = static_cast<double>(n_);
  for (std::size_t i = 0; i < se.size(); ++i) se[i] = std::sqrt(std::max(m2_[i], 0.0) / (nn - 1.0) / nn);
  return se;
}

LinearFit weighted_least_squares(std::span<const double> X, std::span<const double> y, std::span<const double> w,
                                 std::size_t p, bool scale_by_residual) {
  LinearFit fit;
  const std::size_t n = y.size();
  fit.n = n;
  fit.p = p;
  if (X.size() != n * p || w.size() != n) throw DimensionError("least squares: shape mismatch");
  if (n < p) return fit;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double sw = std::sqrt(w[i]);
    for (std::size_t j = 0; j < p; ++j)
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sw * X[i * p + j];
    b(static_cast<Eigen::Index>(i)) = sw * y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < static_cast<Eigen::Index>(p)) return fit;
  Eigen::VectorXd beta = qr.solve(b);
  const double rss = (A * beta - b).squaredNorm();
  Eigen::MatrixXd ata_inv = (A.transpose() * A).inverse();
  double s2 = 1.0;
  if (scale_by_residual) s2 = n > p ? rss / static_cast<double>(n - p) : 0.0;
  fit.beta.assign(beta.data(), beta.data() + p);
  fit.cov.resize(p * p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      fit.cov[i * p + j] = s2 * ata_inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  fit.rss = rss;
  fit.ok = std::isfinite(rss);
  return fit;
}

double t95(std::size_t dof) {
  if (dof == 0) return std::numeric_limits<double>::infinity();
  if (dof > 1000) return 1.959963984540054;
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(boost::math::complement(dist, 0.025));
}

double shifted_mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double y0 = v[0];
  double acc = 0.0;
  for (double x : v) acc += x - y0;
  return y0 + acc / static_cast<double>(v.size());
}

}  // namespace parahom
