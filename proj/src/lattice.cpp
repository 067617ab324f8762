#include "parahom/lattice.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

namespace parahom {

LatticeBox::LatticeBox(std::vector<int> sides) : sides_(std::move(sides)) {
  if (sides_.empty()) throw DimensionError("lattice box needs d >= 1");
  if (sides_.size() > 3) throw DimensionError("lattice box supports d <= 3");
  for (int s : sides_)
    if (s < 2) throw DimensionError("box side must be >= 2, got " + std::to_string(s));
  const int d = dim();
  strides_.assign(static_cast<std::size_t>(d), 1);
  for (int i = d - 2; i >= 0; --i)
    strides_[static_cast<std::size_t>(i)] =
        strides_[static_cast<std::size_t>(i) + 1] * static_cast<std::size_t>(sides_[static_cast<std::size_t>(i) + 1]);
  size_ = strides_[0] * static_cast<std::size_t>(sides_[0]);
  if (size_ >= (std::size_t{1} << 32)) throw DimensionError("box too large for 32-bit neighbor tables");

  auto up = std::make_shared<std::vector<std::uint32_t>>(size_ * static_cast<std::size_t>(d));
  auto down = std::make_shared<std::vector<std::uint32_t>>(size_ * static_cast<std::size_t>(d));
  std::vector<int> x(static_cast<std::size_t>(d));
  for (std::size_t idx = 0; idx < size_; ++idx) {
    coords(idx, x);
    for (int a = 0; a < d; ++a) {
      const auto au = static_cast<std::size_t>(a);
      const int L = sides_[au];
      const std::size_t base = idx - static_cast<std::size_t>(x[au]) * strides_[au];
      (*up)[au * size_ + idx] =
          static_cast<std::uint32_t>(base + static_cast<std::size_t>((x[au] + 1) % L) * strides_[au]);
      (*down)[au * size_ + idx] =
          static_cast<std::uint32_t>(base + static_cast<std::size_t>((x[au] + L - 1) % L) * strides_[au]);
    }
  }
  up_table_ = up;
  down_table_ = down;
  up_ = up_table_->data();
  down_ = down_table_->data();
}

LatticeBox LatticeBox::cube(int d, int side) {
  if (d < 1) throw DimensionError("d must be >= 1");
  return LatticeBox(std::vector<int>(static_cast<std::size_t>(d), side));
}

std::size_t LatticeBox::index(std::span<const int> x) const {
  if (static_cast<int>(x.size()) != dim()) throw DimensionError("coordinate rank mismatch");
  std::size_t idx = 0;
  for (std::size_t a = 0; a < x.size(); ++a) {
    int L = sides_[a];
    int c = x[a] % L;
    if (c < 0) c += L;
    idx += static_cast<std::size_t>(c) * strides_[a];
  }
  return idx;
}

void LatticeBox::coords(std::size_t idx, std::span<int> out) const {
  for (std::size_t a = 0; a < sides_.size(); ++a) {
    out[a] = static_cast<int>(idx / strides_[a]);
    idx -= static_cast<std::size_t>(out[a]) * strides_[a];
  }
}

void LatticeBox::centered_coords(std::size_t idx, std::span<int> out) const {
  coords(idx, out);
  for (std::size_t a = 0; a < sides_.size(); ++a)
    if (out[a] >= sides_[a] / 2 + sides_[a] % 2) out[a] -= sides_[a];
}

template <typename T>
ScalarFieldT<T>::ScalarFieldT(LatticeBox box, std::vector<T> values)
    : box_(std::move(box)), values_(std::move(values)) {
  if (values_.size() != box_.size()) throw DimensionError("field size does not match box");
}

template <typename T>
T ScalarFieldT<T>::sum() const {
  T s{};
  for (const auto& v : values_) s += v;
  return s;
}

namespace {
inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }
}  // namespace

template <typename T>
bool ScalarFieldT<T>::finite() const {
  return std::all_of(values_.begin(), values_.end(), [](const T& v) { return is_finite(v); });
}

template <typename T>
bool VectorFieldT<T>::finite() const {
  return std::all_of(values_.begin(), values_.end(), [](const T& v) { return is_finite(v); });
}

template class ScalarFieldT<double>;
template class ScalarFieldT<cplx>;
template class VectorFieldT<double>;
template class VectorFieldT<cplx>;

EllipticityBounds::EllipticityBounds(double lo, double hi, int dim) : lambda(lo), Lambda(hi), d(dim) {
  if (!(lo > 0.0)) throw EllipticityError("lambda must be positive");
  if (!(hi >= lo)) throw EllipticityError("Lambda must be >= lambda");
  if (dim < 1) throw DimensionError("d must be >= 1");
}

void EllipticityBounds::require_discrete_stable() const {
  if (!discrete_stable())
    throw StabilityError("discrete-time stability requires 4 d Lambda <= 1, got " +
                         std::to_string(4.0 * d * Lambda));
}

std::pair<double, double> symmetric_eigen_range(std::span<const double> m, int d) {
  if (d == 1) return {m[0], m[0]};
  if (d == 2) {
    const double tr = 0.5 * (m[0] + m[3]);
    const double df = 0.5 * (m[0] - m[3]);
    const double r = std::hypot(df, m[1]);
    return {tr - r, tr + r};
  }
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = m[static_cast<std::size_t>(i * 3 + j)];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(2)};
}

namespace {
constexpr double kEllipticTol = 1e-12;
}

CoefficientSlice::CoefficientSlice(LatticeBox box, std::vector<double> values,
                                   const EllipticityBounds& bounds)
    : box_(std::move(box)), values_(std::move(values)), bounds_(bounds) {
  const int d = box_.dim();
  if (bounds.d != d) throw DimensionError("ellipticity bounds dimension mismatch");
  const auto dd = static_cast<std::size_t>(d * d);
  if (values_.size() != box_.size() * dd) throw DimensionError("coefficient slice size mismatch");
  const double lo = bounds.lambda * (1.0 - kEllipticTol);
  const double hi = bounds.Lambda * (1.0 + kEllipticTol);
  scalar_ = true;
  for (std::size_t s = 0; s < box_.size(); ++s) {
    auto m = at(s);
    bool diag_equal = true;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double v = m[static_cast<std::size_t>(i * d + j)];
        if (!std::isfinite(v)) throw EllipticityError("non-finite coefficient");
        if (v != m[static_cast<std::size_t>(j * d + i)]) throw EllipticityError("coefficient not symmetric");
        if (i != j && v != 0.0) diag_equal = false;
        if (i == j && v != m[0]) diag_equal = false;
      }
    scalar_ = scalar_ && diag_equal;
    auto [emin, emax] = diag_equal ? std::pair{m[0], m[0]} : symmetric_eigen_range(m, d);
    if (emin < lo || emax > hi)
      throw EllipticityError("coefficient eigenvalues [" + std::to_string(emin) + ", " +
                             std::to_string(emax) + "] outside [lambda, Lambda] at site " +
                             std::to_string(s));
  }
}

CoefficientSlice CoefficientSlice::scalar(LatticeBox box, std::span<const double> s,
                                          const EllipticityBounds& bounds) {
  const int d = box.dim();
  if (s.size() != box.size()) throw DimensionError("scalar coefficient size mismatch");
  const auto dd = static_cast<std::size_t>(d * d);
  std::vector<double> v(box.size() * dd, 0.0);
  for (std::size_t i = 0; i < box.size(); ++i)
    for (int k = 0; k < d; ++k) v[i * dd + static_cast<std::size_t>(k * d + k)] = s[i];
  return CoefficientSlice(std::move(box), std::move(v), bounds);
}

CoefficientSlice CoefficientSlice::constant(LatticeBox box, double kappa, const EllipticityBounds& bounds) {
  std::vector<double> s(box.size(), kappa);
  return scalar(std::move(box), s, bounds);
}

template <typename T>
VectorFieldT<T> gradient(const ScalarFieldT<T>& f) {
  const auto& box = f.box();
  VectorFieldT<T> g(box);
  const auto n = static_cast<std::ptrdiff_t>(box.size());
  for (int a = 0; a < box.dim(); ++a) {
    auto ga = g.component(a);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(i);
      ga[s] = f[box.plus(s, a)] - f[s];
    }
  }
  return g;
}

template <typename T>
ScalarFieldT<T> divergence(const VectorFieldT<T>& v) {
  const auto& box = v.box();
  ScalarFieldT<T> out(box);
  const auto n = static_cast<std::ptrdiff_t>(box.size());
  const int d = box.dim();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    T acc{};
    for (int a = 0; a < d; ++a) {
      auto va = v.component(a);
      acc += va[box.minus(s, a)] - va[s];
    }
    out[s] = acc;
  }
  return out;
}

template VectorFieldT<double> gradient(const ScalarFieldT<double>&);
template VectorFieldT<cplx> gradient(const ScalarFieldT<cplx>&);
template ScalarFieldT<double> divergence(const VectorFieldT<double>&);
template ScalarFieldT<cplx> divergence(const VectorFieldT<cplx>&);

namespace {

// flux_i(x) = Σ_j a_ij(x) ∇_j u(x); out = ∇* flux
void divergence_form_into(const CoefficientSlice& a, std::span<const double> u, std::span<double> out,
                          std::span<double> flux) {
  const auto& box = a.box();
  const int d = box.dim();
  const std::size_t n = box.size();
  const auto ni = static_cast<std::ptrdiff_t>(n);
  const bool scal = a.is_scalar();
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < ni; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const auto m = a.at(s);
      if (scal) {
        for (int k = 0; k < d; ++k)
          flux[static_cast<std::size_t>(k) * n + s] = m[0] * (u[box.plus(s, k)] - u[s]);
      } else {
        double g[3];
        for (int k = 0; k < d; ++k) g[k] = u[box.plus(s, k)] - u[s];
        for (int r = 0; r < d; ++r) {
          double acc = 0.0;
          for (int c = 0; c < d; ++c) acc += m[static_cast<std::size_t>(r * d + c)] * g[c];
          flux[static_cast<std::size_t>(r) * n + s] = acc;
        }
      }
    }
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < ni; ++i) {
      const auto s = static_cast<std::size_t>(i);
      double acc = 0.0;
      for (int k = 0; k < d; ++k) {
        const double* fk = flux.data() + static_cast<std::size_t>(k) * n;
        acc += fk[box.minus(s, k)] - fk[s];
      }
      out[s] = acc;
    }
  }
}

}  // namespace

ScalarField apply_divergence_form(const CoefficientSlice& a, const ScalarField& u) {
  if (!(a.box() == u.box())) throw DimensionError("coefficient and field boxes differ");
  ScalarField out(u.box());
  std::vector<double> flux(u.box().size() * static_cast<std::size_t>(u.box().dim()));
  divergence_form_into(a, u.values(), out.values(), flux);
  return out;
}

void apply_divergence_form_into(const CoefficientSlice& a, std::span<const double> u, std::span<double> out,
                                std::span<double> scratch) {
  const std::size_t n = a.box().size();
  if (u.size() != n || out.size() != n) throw DimensionError("divergence form: field size mismatch");
  if (scratch.size() < n * static_cast<std::size_t>(a.dim())) throw DimensionError("divergence form: scratch too small");
  divergence_form_into(a, u, out, scratch);
}

void step_divergence_form(const CoefficientSlice& a, std::span<const double> u, std::span<double> out,
                          std::span<double> scratch) {
  const auto& box = a.box();
  const std::size_t n = box.size();
  if (u.size() != n || out.size() != n) throw DimensionError("step: field size mismatch");
  if (scratch.size() < n * static_cast<std::size_t>(box.dim())) throw DimensionError("step: scratch too small");
  const int d = box.dim();
  const auto ni = static_cast<std::ptrdiff_t>(n);
  if (a.is_scalar()) {
    // Nonnegative-weight form: u' = u - Σ_k [c(x)(u(x+e_k)-u(x)) terms], written so that
    // each contribution is a product of nonnegative weights when 4dΛ <= 1.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < ni; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const double cs = a.at(s)[0];
      double w0 = 1.0;
      double acc = 0.0;
      for (int k = 0; k < d; ++k) {
        const std::size_t sm = box.minus(s, k);
        const double cm = a.at(sm)[0];
        w0 -= cs + cm;
        acc += cs * u[box.plus(s, k)] + cm * u[sm];
      }
      out[s] = w0 * u[s] + acc;
    }
    return;
  }
  divergence_form_into(a, u, out, scratch);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ni; ++i) {
    const auto s = static_cast<std::size_t>(i);
    out[s] = u[s] - out[s];
  }
}

template <typename T>
T inner(std::span<const T> a, std::span<const T> b) {
  T acc{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if constexpr (std::is_same_v<T, cplx>)
      acc += std::conj(a[i]) * b[i];
    else
      acc += a[i] * b[i];
  }
  return acc;
}
template double inner(std::span<const double>, std::span<const double>);
template cplx inner(std::span<const cplx>, std::span<const cplx>);

namespace serial {

namespace {
std::size_t shifted(const LatticeBox& box, std::size_t s, int axis, int delta) {
  std::vector<int> x(static_cast<std::size_t>(box.dim()));
  box.coords(s, x);
  x[static_cast<std::size_t>(axis)] += delta;
  return box.index(x);
}
}  // namespace

VectorField gradient(const ScalarField& f) {
  const auto& box = f.box();
  VectorField g(box);
  for (int a = 0; a < box.dim(); ++a)
    for (std::size_t s = 0; s < box.size(); ++s) g.component(a)[s] = f[shifted(box, s, a, 1)] - f[s];
  return g;
}

ScalarField divergence(const VectorField& v) {
  const auto& box = v.box();
  ScalarField out(box);
  for (std::size_t s = 0; s < box.size(); ++s) {
    double acc = 0.0;
    for (int a = 0; a < box.dim(); ++a) acc += v.component(a)[shifted(box, s, a, -1)] - v.component(a)[s];
    out[s] = acc;
  }
  return out;
}

ScalarField apply_divergence_form(const CoefficientSlice& a, const ScalarField& u) {
  const auto& box = u.box();
  const int d = box.dim();
  VectorField g = gradient(u);
  VectorField flux(box);
  for (std::size_t s = 0; s < box.size(); ++s) {
    const auto m = a.at(s);
    for (int r = 0; r < d; ++r) {
      double acc = 0.0;
      for (int c = 0; c < d; ++c) acc += m[static_cast<std::size_t>(r * d + c)] * g.component(c)[s];
      flux.component(r)[s] = acc;
    }
  }
  return divergence(flux);
}

}  // namespace serial

}  // namespace parahom
