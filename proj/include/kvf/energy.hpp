#pragma once

// Yang-Mills-Higgs energy, moment map, vortex functional and the energy identity
//
//   YMH = ||F_A||^2 + ||d_A phi||^2 + 1/4 ||phi phi^* - tau I||^2
//       = ||Psi||^2 + 4 ||F_A^{0,2}||^2 + 2 ||dbar_A phi||^2 + 2 pi tau C_1 - 8 pi^2 Ch_2,
//   Psi = Lambda F_A - (i/2)(phi phi^* - tau I).
//
// All quantities are evaluated by one streaming per-site kernel, so no
// intermediate curvature or derivative fields are stored.

#include <vector>

#include "kvf/bundle.hpp"

namespace kvf {

/// Pointwise densities at one site (squared norms use the Hilbert-Schmidt norm).
struct SiteTerms {
  double F_sq = 0.0;        // |F|^2 summed over components mu < nu
  double dphi_sq = 0.0;     // |d_A phi|^2
  double quartic = 0.0;     // 1/4 |phi phi^* - tau|^2
  double moment_sq = 0.0;   // |Psi|^2
  double f02_sq = 0.0;      // |F^{0,2}|^2
  double dbar_sq = 0.0;     // |dbar_A phi|^2
  double phi_sq = 0.0;      // |phi|^2
  double lambdaF_norm = 0.0;  // |Lambda F|
  double i_lambdaF = 0.0;   // Re tr(i Lambda F) / rank
  Mat psi;                  // moment map value
};

/// Evaluates SiteTerms; caches the pointwise projectors for the state's dimension.
class SiteKernel {
 public:
  SiteKernel(const FieldState& s, double tau);
  SiteTerms operator()(std::size_t site) const;

 private:
  const FieldState& s_;
  double tau_;
  const std::vector<cplx>& p01_;  // (0,1) projector on 1-forms
  const std::vector<cplx>& p02_;  // (0,2) projector on 2-forms
};

struct EnergyReport {
  double ymh_total = 0.0;
  double term_F = 0.0;
  double term_dphi = 0.0;
  double term_quartic = 0.0;
  double moment_sq = 0.0;
  double term_F02 = 0.0;   // 4 ||F^{0,2}||^2
  double term_dbar = 0.0;  // 2 ||dbar_A phi||^2
  double topo_const = 0.0;
  double identity_residual = 0.0;
};

struct TopologicalConstants {
  double c1 = 0.0;
  double ch2 = 0.0;
  double topo_const = 0.0;
};

/// Requires tau > 0 (InvalidArgument otherwise).
EnergyReport ymh(const FieldState& s, double tau);

/// Psi as an anti-Hermitian End(E)-valued 0-form.
FormField moment_map(const FieldState& s, double tau);

/// ||Psi||^2; identical to ymh(s, tau).moment_sq.
double vortex_functional(const FieldState& s, double tau);

struct IdentityResidual {
  double absolute = 0.0;
  double relative = 0.0;  // absolute / ymh_total (absolute when ymh_total == 0)
};
IdentityResidual energy_identity_residual(const FieldState& s, double tau);

/// C_1 = d for m = 1; everything zero for the supported m = 2 bundles (d = 0).
TopologicalConstants topological_constants(const BundleSpec& spec, const LatticeGeometry& geom, double tau);

}  // namespace kvf
