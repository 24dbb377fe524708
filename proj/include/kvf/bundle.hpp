#pragma once

// Hermitian vector bundles over the lattice torus, connection/section pairs,
// covariant derivatives, curvature, gauge transformations and initial data.
//
// Conventions:
//  * d_A = d + A with A anti-Hermitian.
//  * A nonzero degree d (rank 1, complex dimension 1 only) is carried by a fixed
//    background connection A_bg = -(2 pi i d x / L^2) dy together with the
//    boundary twist phi(x + L, y) = exp(2 pi i d y / L) phi(x, y). The stored
//    connection A is a plainly periodic perturbation of A_bg.
//  * The background curvature is the constant F_bg = -(2 pi i d / L^2) dx ^ dy.

#include <cstdint>
#include <vector>

#include "kvf/lattice.hpp"
#include "kvf/small_matrix.hpp"

namespace kvf {

struct BundleSpec {
  int rank = 1;
  int degree = 0;
};

/// Throws UnsupportedTopology / InvalidArgument when the pair cannot be represented.
void validate_bundle(const BundleSpec& spec, const LatticeGeometry& geom);

/// A connection/section pair (A, phi).
class FieldState {
 public:
  FieldState() = default;
  /// Zero perturbation and zero section over the background of `spec`.
  FieldState(const BundleSpec& spec, const LatticeGeometry& geom);

  const BundleSpec& spec() const { return spec_; }
  const LatticeGeometry& geometry() const { return A_.geometry(); }
  int rank() const { return spec_.rank; }

  /// Periodic anti-Hermitian perturbation of the background connection (1-form, n x n).
  FormField& A() { return A_; }
  const FormField& A() const { return A_; }
  /// Higgs section (0-form, C^n) on the fundamental domain.
  FormField& phi() { return phi_; }
  const FormField& phi() const { return phi_; }

  Mat A_at(int axis, std::size_t site) const { return Mat::load(A_.at(axis, site), spec_.rank); }
  Vec phi_at(std::size_t site) const { return Vec::load(phi_.at(0, site), spec_.rank); }

  /// Total connection coefficient (background + perturbation) along `axis`.
  Mat connection_at(int axis, std::size_t site) const;
  /// Constant background curvature component F_bg,{mu nu} (mu < nu).
  cplx background_curvature(int mu, int nu) const;

  /// Twist phase picked up by a section read `k` steps along `axis` from `site`.
  cplx twist(std::size_t site, int axis, int crossing) const;

  bool same_layout(const FieldState& o) const;

 private:
  BundleSpec spec_;
  FormField A_;
  FormField phi_;
  double bg_slope_ = 0.0;  // A_bg,y1 = i * bg_slope_ * x
};

/// Zero perturbation, zero section: the constant-curvature reference state.
FieldState background_state(const BundleSpec& spec, const LatticeGeometry& geom);

// --- site kernels ---------------------------------------------------------

/// Section-valued field component read `k` steps along `axis`, including the twist.
Vec section_read(const FieldState& s, const FormField& f, int comp, std::size_t site, int axis, int k);

/// Central covariant difference of a section-valued field component:
/// sum_k c_k (f(x+k) - f(x-k))/h + A_axis(x) f(x).
Vec section_covariant_difference(const FieldState& s, const FormField& f, int comp, int axis,
                                 std::size_t site);

/// Central covariant difference of an End(E)-valued field component:
/// sum_k c_k (X(x+k) - X(x-k))/h + [A_axis(x), X(x)].
Mat end_covariant_difference(const FieldState& s, const FormField& X, int comp, int axis,
                             std::size_t site);

/// D_axis phi at a site.
Vec covariant_derivative_at(const FieldState& s, int axis, std::size_t site);

/// Curvature component F_{mu nu} at a site (any mu != nu, antisymmetric).
Mat curvature_at(const FieldState& s, int mu, int nu, std::size_t site);

// --- whole-field operators -------------------------------------------------

/// d_A phi as a C^n-valued 1-form.
FormField covariant_d(const FieldState& s);

struct CovariantSplit {
  FormField del;   // (1,0) part of d_A phi
  FormField dbar;  // (0,1) part of d_A phi
};
CovariantSplit covariant_split(const FieldState& s);

/// F_A (total, including background) as an End(E)-valued 2-form.
FormField curvature(const FieldState& s);

/// Exact adjoint of d_A on section-valued 1-forms: (d_A^* psi) = -sum_mu D_mu psi_mu.
FormField section_codifferential(const FieldState& s, const FormField& psi);

/// d_A on End(E)-valued 0-forms: (d_A X)_mu = D_mu X.
FormField end_covariant_d(const FieldState& s, const FormField& X);

/// Exact adjoint of d_A on End(E)-valued 2-forms: (d_A^* G)_nu = -sum_mu D_mu G_{mu nu}.
FormField end_codifferential(const FieldState& s, const FormField& G);

/// Discrete flux (i / 2 pi) sum_sites tr(Lambda F) h^2 (complex dimension 1 only).
double discrete_flux(const FieldState& s);

// --- gauge action ----------------------------------------------------------

/// Complex gauge transformation g (0-form of invertible n x n matrices).
struct GaugeTransform {
  FormField g;
  bool unitary = false;

  /// Identity transformation.
  static GaugeTransform identity(const LatticeGeometry& geom, int rank);
  /// Pointwise exp(X) for an End(E)-valued 0-form; unitary when X is anti-Hermitian.
  static GaugeTransform exponential(const FormField& X);
  /// max_x || g^* g - I ||.
  double unitarity_defect() const;
};

/// Acts by A^{0,1} -> g A^{0,1} g^-1 - (dbar g) g^-1, A^{1,0} -> (g^*)^-1 A^{1,0} g^* + (g^*)^-1 d(g^*)^{1,0},
/// phi -> g phi. The result is anti-Hermitian for every invertible g. Throws on singular g.
FieldState gauge_transform(const FieldState& s, const GaugeTransform& g);

/// Pointwise product g1 g2.
GaugeTransform compose(const GaugeTransform& g1, const GaugeTransform& g2);

// --- initial data ----------------------------------------------------------

/// Holomorphic section of the degree-d line bundle on the 2-torus, built from the
/// quasi-periodic theta series and normalised to sup |phi| = 1 over the sites.
/// Throws when the omitted tail exceeds 1e-12.
FormField theta_section(const BundleSpec& spec, const LatticeGeometry& geom, int truncation = 6);

struct WindingCount {
  int total = 0;      // sum of plaquette windings
  int vortices = 0;   // number of plaquettes with nonzero winding
};
/// Plaquette winding numbers of a section, read with the twist convention.
WindingCount winding_count(const FieldState& s);

struct RandomOptions {
  double connection_amplitude = 0.3;
  double section_amplitude = 1.0;
  /// Constant added to the random section (keeps it away from zero when desired).
  double section_offset = 0.0;
};

/// Deterministic band-limited smooth state. The fields are evaluations of one
/// continuum trigonometric polynomial, so they do not depend on N beyond sampling.
/// For d != 0 the section is theta_section times a periodic random factor.
/// Requires band_limit <= N/4.
FieldState random_state(const BundleSpec& spec, const LatticeGeometry& geom, std::uint64_t seed,
                        int band_limit, const RandomOptions& opts = {});

/// Evaluates sum_k c_k exp(2 pi i k.x / L) at every site; coefficients are indexed with axis 0
/// fastest, each wave number running over [-K, K].
std::vector<cplx> evaluate_trigonometric(const LatticeGeometry& geom, int K, const std::vector<cplx>& coeffs);

}  // namespace kvf
