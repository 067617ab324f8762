#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "parahom/error.hpp"

namespace parahom {

using cplx = std::complex<double>;

// Periodic box [0,L_1)x...x[0,L_d), flat row-major indexing (last axis fastest).
class LatticeBox {
 public:
  LatticeBox() = default;
  explicit LatticeBox(std::vector<int> sides);
  static LatticeBox cube(int d, int side);

  int dim() const noexcept { return static_cast<int>(sides_.size()); }
  int side(int axis) const { return sides_.at(static_cast<std::size_t>(axis)); }
  const std::vector<int>& sides() const noexcept { return sides_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  // Arbitrary integer coordinates are wrapped periodically.
  std::size_t index(std::span<const int> x) const;
  void coords(std::size_t idx, std::span<int> out) const;
  // Coordinates mapped to [-L/2, L/2).
  void centered_coords(std::size_t idx, std::span<int> out) const;

  std::size_t plus(std::size_t idx, int axis) const noexcept {
    return up_[static_cast<std::size_t>(axis) * size_ + idx];
  }
  std::size_t minus(std::size_t idx, int axis) const noexcept {
    return down_[static_cast<std::size_t>(axis) * size_ + idx];
  }

  bool operator==(const LatticeBox& o) const noexcept { return sides_ == o.sides_; }

 private:
  std::vector<int> sides_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
  // Shared so copies of a box are cheap; immutable after construction.
  std::shared_ptr<const std::vector<std::uint32_t>> up_table_, down_table_;
  const std::uint32_t* up_ = nullptr;
  const std::uint32_t* down_ = nullptr;
};

template <typename T>
class ScalarFieldT {
 public:
  ScalarFieldT() = default;
  explicit ScalarFieldT(LatticeBox box) : box_(std::move(box)), values_(box_.size()) {}
  ScalarFieldT(LatticeBox box, std::vector<T> values);

  const LatticeBox& box() const noexcept { return box_; }
  std::size_t size() const noexcept { return values_.size(); }
  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  T sum() const;
  bool finite() const;

 private:
  LatticeBox box_;
  std::vector<T> values_;
};

// Component-major storage: component i occupies [i*n, (i+1)*n).
template <typename T>
class VectorFieldT {
 public:
  VectorFieldT() = default;
  explicit VectorFieldT(LatticeBox box)
      : box_(std::move(box)), values_(box_.size() * static_cast<std::size_t>(box_.dim())) {}

  const LatticeBox& box() const noexcept { return box_; }
  int dim() const noexcept { return box_.dim(); }
  std::span<T> component(int i) noexcept {
    return {values_.data() + static_cast<std::size_t>(i) * box_.size(), box_.size()};
  }
  std::span<const T> component(int i) const noexcept {
    return {values_.data() + static_cast<std::size_t>(i) * box_.size(), box_.size()};
  }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  bool finite() const;

 private:
  LatticeBox box_;
  std::vector<T> values_;
};

using ScalarField = ScalarFieldT<double>;
using ComplexScalarField = ScalarFieldT<cplx>;
using VectorField = VectorFieldT<double>;
using ComplexVectorField = VectorFieldT<cplx>;

struct EllipticityBounds {
  double lambda = 1.0;
  double Lambda = 1.0;
  int d = 1;

  EllipticityBounds() = default;
  EllipticityBounds(double lo, double hi, int dim);
  // 4dΛ <= 1, required by the explicit discrete-time scheme.
  bool discrete_stable() const noexcept { return 4.0 * d * Lambda <= 1.0 + 1e-15; }
  void require_discrete_stable() const;
};

// Per-site symmetric d x d matrix, row-major within a site.
class CoefficientSlice {
 public:
  CoefficientSlice() = default;
  // Validates symmetry and the quadratic-form bounds at every site.
  CoefficientSlice(LatticeBox box, std::vector<double> values, const EllipticityBounds& bounds);
  static CoefficientSlice scalar(LatticeBox box, std::span<const double> s,
                                 const EllipticityBounds& bounds);
  static CoefficientSlice constant(LatticeBox box, double kappa, const EllipticityBounds& bounds);

  const LatticeBox& box() const noexcept { return box_; }
  int dim() const noexcept { return box_.dim(); }
  const EllipticityBounds& bounds() const noexcept { return bounds_; }
  // True when every site is a multiple of the identity.
  bool is_scalar() const noexcept { return scalar_; }
  std::span<const double> at(std::size_t site) const noexcept {
    const auto dd = static_cast<std::size_t>(dim() * dim());
    return {values_.data() + site * dd, dd};
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  LatticeBox box_;
  std::vector<double> values_;
  EllipticityBounds bounds_;
  bool scalar_ = false;
};

// Extreme eigenvalues of a symmetric d x d matrix (row-major).
std::pair<double, double> symmetric_eigen_range(std::span<const double> m, int d);

template <typename T>
VectorFieldT<T> gradient(const ScalarFieldT<T>& f);
template <typename T>
ScalarFieldT<T> divergence(const VectorFieldT<T>& v);

// ∇*(a∇u).
ScalarField apply_divergence_form(const CoefficientSlice& a, const ScalarField& u);
// out = ∇*(a∇u) without allocation; scratch must hold d*n doubles.
void apply_divergence_form_into(const CoefficientSlice& a, std::span<const double> u, std::span<double> out,
                                std::span<double> scratch);
// out = u - ∇*(a∇u); scratch must hold d*n doubles.
void step_divergence_form(const CoefficientSlice& a, std::span<const double> u,
                          std::span<double> out, std::span<double> scratch);

template <typename T>
T inner(std::span<const T> a, std::span<const T> b);

namespace serial {
// Reference implementations: coordinate arithmetic per access, no threading.
VectorField gradient(const ScalarField& f);
ScalarField divergence(const VectorField& v);
ScalarField apply_divergence_form(const CoefficientSlice& a, const ScalarField& u);
}  // namespace serial

}  // namespace parahom
