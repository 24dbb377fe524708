#pragma once

// Discrete flat Kaehler geometry on the torus (R/LZ)^{2m}.
//
// Real axes are ordered x_1, y_1, x_2, y_2; the Kaehler form is
// omega = sum_j dx_j ^ dy_j and the complex coordinates are z_j = x_j + i y_j.
// Sites sit at cell centres, position (i + 1/2) h along every axis.
//
// All fields are collocated at sites. Derivatives along an axis use an
// antisymmetric central stencil (second or fourth order), so the discrete
// derivatives commute with each other, d o d = 0 holds to rounding and the
// codifferential is the exact adjoint of d under inner().

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "kvf/small_matrix.hpp"

namespace kvf {

enum class StencilOrder : int { second = 2, fourth = 4 };

class LatticeGeometry {
 public:
  LatticeGeometry() = default;

  int complex_dim() const { return m_; }
  int real_dim() const { return 2 * m_; }
  double length() const { return length_; }
  int sites_per_axis() const { return n_; }
  double spacing() const { return spacing_; }
  double volume() const { return volume_; }
  std::size_t site_count() const { return sites_; }
  StencilOrder stencil() const { return order_; }
  /// Quadrature weight h^{2m} of a single site.
  double cell_volume() const { return cell_; }

  std::size_t stride(int axis) const { return strides_[axis]; }
  int coord(std::size_t site, int axis) const {
    return static_cast<int>((site / strides_[axis]) % static_cast<std::size_t>(n_));
  }
  double position(std::size_t site, int axis) const { return (coord(site, axis) + 0.5) * spacing_; }
  std::size_t site_at(std::span<const int> coords) const;

  /// Periodic neighbour k steps along `axis`. `crossing` receives +1/-1 when
  /// the step wraps forward/backward across the boundary, else 0.
  std::size_t shift(std::size_t site, int axis, int k, int* crossing = nullptr) const {
    const int c = coord(site, axis);
    int nc = c + k;
    int wrap = 0;
    if (nc >= n_) {
      nc -= n_;
      wrap = 1;
    } else if (nc < 0) {
      nc += n_;
      wrap = -1;
    }
    if (crossing) *crossing = wrap;
    return site + static_cast<std::size_t>(static_cast<long long>(nc - c) *
                                           static_cast<long long>(strides_[axis]));
  }

  /// Central-difference weights c_k, k = 1..r: Df = sum_k c_k (f(x+kh) - f(x-kh)) / h.
  std::span<const double> stencil_weights() const;
  int stencil_radius() const { return static_cast<int>(order_) / 2; }

  bool operator==(const LatticeGeometry& o) const {
    return m_ == o.m_ && length_ == o.length_ && n_ == o.n_ && order_ == o.order_;
  }

 private:
  friend LatticeGeometry build_torus(int, double, int, StencilOrder);

  int m_ = 1;
  double length_ = 1.0;
  int n_ = 4;
  double spacing_ = 0.25;
  double volume_ = 1.0;
  double cell_ = 1.0;
  std::size_t sites_ = 0;
  StencilOrder order_ = StencilOrder::fourth;
  std::size_t strides_[4] = {1, 1, 1, 1};
};

/// Flat torus of complex dimension m, side L, N sites per real axis.
/// Throws InvalidArgument for m not in {1,2}, odd N, N < 4, L <= 0.
LatticeGeometry build_torus(int m, double L, int N, StencilOrder order = StencilOrder::fourth);

/// Component layout of p-forms on a D-dimensional lattice: strictly increasing
/// axis tuples in lexicographic order, encoded as bitmasks.
class FormBasis {
 public:
  static const FormBasis& get(int dims, int degree);

  int dims() const { return dims_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(masks_.size()); }
  unsigned mask(int comp) const { return masks_[comp]; }
  /// Component index of a mask, or -1.
  int index(unsigned mask) const { return index_[mask]; }

 private:
  FormBasis(int dims, int degree);
  int dims_;
  int degree_;
  std::vector<unsigned> masks_;
  std::vector<int> index_;
};

/// Shape of the value carried at each site and component.
struct ValueShape {
  int rows = 1;
  int cols = 1;
  int size() const { return rows * cols; }
  bool operator==(const ValueShape& o) const { return rows == o.rows && cols == o.cols; }

  static ValueShape scalar() { return {1, 1}; }
  static ValueShape vector(int n) { return {n, 1}; }
  static ValueShape matrix(int n) { return {n, n}; }
};

/// A p-form with values of a fixed shape. Storage is [component][site][entry].
class FormField {
 public:
  FormField() = default;
  FormField(const LatticeGeometry& geom, int degree, ValueShape shape);

  const LatticeGeometry& geometry() const { return geom_; }
  int degree() const { return degree_; }
  ValueShape shape() const { return shape_; }
  int components() const { return ncomp_; }
  std::size_t sites() const { return geom_.site_count(); }
  std::size_t size() const { return data_.size(); }

  cplx* at(int comp, std::size_t site) {
    return data_.data() + (static_cast<std::size_t>(comp) * sites() + site) * shape_.size();
  }
  const cplx* at(int comp, std::size_t site) const {
    return data_.data() + (static_cast<std::size_t>(comp) * sites() + site) * shape_.size();
  }
  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  bool same_layout(const FormField& o) const {
    return geom_ == o.geom_ && degree_ == o.degree_ && shape_ == o.shape_;
  }

  FormField& operator+=(const FormField& o);
  FormField& operator-=(const FormField& o);
  FormField& operator*=(cplx s);
  /// this += s * o
  FormField& axpy(cplx s, const FormField& o);

  void fill(cplx v);
  double max_abs() const;
  bool all_finite() const;

 private:
  LatticeGeometry geom_;
  int degree_ = 0;
  ValueShape shape_;
  int ncomp_ = 0;
  std::vector<cplx> data_;
};

FormField operator+(FormField a, const FormField& b);
FormField operator-(FormField a, const FormField& b);
FormField operator*(cplx s, FormField a);

/// Central difference of component `comp` along `axis` at `site`, written to out[0..shape.size()).
void axis_difference(const FormField& f, int comp, int axis, std::size_t site, cplx* out);

/// Exterior derivative on periodic fields: (df)_M = sum_{mu in M} (-1)^{#M below mu} D_mu f_{M\mu}.
/// Throws InvalidArgument when the degree would exceed 2m.
FormField exterior_derivative(const FormField& f);

/// Exact adjoint of exterior_derivative under inner(). Throws for degree 0.
FormField codifferential(const FormField& g);

/// Contraction with omega: (Lambda F) = sum_j F_{x_j y_j}. Degree-2 input only.
FormField lambda_contract(const FormField& F);

/// f |-> f omega, the adjoint of lambda_contract.
FormField wedge_omega(const FormField& f);

/// h^{2m} sum Re <f, g>, summed over sites, components and value entries.
double inner(const FormField& f, const FormField& g);
double norm(const FormField& f);

/// Pointwise projector onto forms of type (p, q) for degree p + q in {0, 1, 2},
/// as a row-major C x C complex matrix acting on the component vector.
const std::vector<cplx>& type_projector(int dims, int p, int q);

/// Applies type_projector(p, q) at every site.
FormField type_project(const FormField& f, int p, int q);

struct TypeParts {
  FormField f20;
  FormField f11;
  FormField f02;
};

/// Splits a 2-form into its (2,0), (1,1), (0,2) parts, using dz_j = dx_j + i dy_j.
TypeParts type_decompose(const FormField& F);

/// Flat Dolbeault operators on forms of degree 0 and 1, and their exact adjoints.
FormField del(const FormField& f);
FormField dbar(const FormField& f);
FormField del_adjoint(const FormField& g);
FormField dbar_adjoint(const FormField& g);

}  // namespace kvf
