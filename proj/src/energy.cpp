#include "kvf/energy.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <numbers>

#include "kvf/error.hpp"
#include "kvf/parallel.hpp"

namespace kvf {

namespace {

const cplx kI(0.0, 1.0);

void require_positive_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be positive and finite");
}

}  // namespace

SiteKernel::SiteKernel(const FieldState& s, double tau)
    : s_(s),
      tau_(tau),
      p01_(type_projector(s.geometry().real_dim(), 0, 1)),
      p02_(type_projector(s.geometry().real_dim(), 0, 2)) {}

SiteTerms SiteKernel::operator()(std::size_t x) const {
  const auto& g = s_.geometry();
  const int D = g.real_dim();
  const int n = s_.rank();
  const auto& basis = FormBasis::get(D, 2);
  SiteTerms t;

  std::array<Mat, 6> F;
  Mat lambdaF = Mat::zero(n);
  for (int c = 0; c < basis.size(); ++c) {
    const unsigned M = basis.mask(c);
    const int mu = std::countr_zero(M);
    const int nu = 31 - std::countl_zero(M);
    F[c] = curvature_at(s_, mu, nu, x);
    t.F_sq += F[c].norm2();
    if (nu == mu + 1 && mu % 2 == 0) lambdaF += F[c];
  }
  if (D == 4) {
    for (int oc = 0; oc < basis.size(); ++oc) {
      Mat acc = Mat::zero(n);
      for (int ic = 0; ic < basis.size(); ++ic) {
        const cplx p = p02_[static_cast<std::size_t>(oc) * basis.size() + ic];
        if (p != cplx(0.0)) acc += p * F[ic];
      }
      t.f02_sq += acc.norm2();
    }
  }

  std::array<Vec, 4> Dphi;
  for (int mu = 0; mu < D; ++mu) {
    Dphi[mu] = covariant_derivative_at(s_, mu, x);
    t.dphi_sq += Dphi[mu].norm2();
  }
  for (int mu = 0; mu < D; ++mu) {
    Vec acc = Vec::zero(n);
    for (int nu = 0; nu < D; ++nu) {
      const cplx p = p01_[static_cast<std::size_t>(mu) * D + nu];
      if (p != cplx(0.0)) acc += p * Dphi[nu];
    }
    t.dbar_sq += acc.norm2();
  }

  const Vec phi = s_.phi_at(x);
  t.phi_sq = phi.norm2();
  const Mat M = outer(phi, phi) - Mat::scalar(n, tau_);
  t.quartic = 0.25 * M.norm2();
  t.psi = lambdaF - (0.5 * kI) * M;
  t.moment_sq = t.psi.norm2();
  t.lambdaF_norm = std::sqrt(lambdaF.norm2());
  t.i_lambdaF = (kI * lambdaF.trace()).real() / n;
  return t;
}

TopologicalConstants topological_constants(const BundleSpec& spec, const LatticeGeometry& geom, double tau) {
  validate_bundle(spec, geom);
  TopologicalConstants tc;
  if (geom.complex_dim() == 1) tc.c1 = spec.degree;
  tc.topo_const = 2.0 * std::numbers::pi * tau * tc.c1 - 8.0 * std::numbers::pi * std::numbers::pi * tc.ch2;
  return tc;
}

EnergyReport ymh(const FieldState& s, double tau) {
  require_positive_tau(tau);
  const SiteKernel kernel(s, tau);
  const auto& g = s.geometry();
  auto sums = parallel_sum(g.site_count(), 6, [&](std::size_t x, double* acc) {
    const SiteTerms t = kernel(x);
    acc[0] += t.F_sq;
    acc[1] += t.dphi_sq;
    acc[2] += t.quartic;
    acc[3] += t.moment_sq;
    acc[4] += t.f02_sq;
    acc[5] += t.dbar_sq;
  });
  const double w = g.cell_volume();
  EnergyReport r;
  r.term_F = sums[0] * w;
  r.term_dphi = sums[1] * w;
  r.term_quartic = sums[2] * w;
  r.ymh_total = r.term_F + r.term_dphi + r.term_quartic;
  r.moment_sq = sums[3] * w;
  r.term_F02 = 4.0 * sums[4] * w;
  r.term_dbar = 2.0 * sums[5] * w;
  r.topo_const = topological_constants(s.spec(), g, tau).topo_const;
  r.identity_residual = r.ymh_total - (r.moment_sq + r.term_F02 + r.term_dbar + r.topo_const);
  return r;
}

FormField moment_map(const FieldState& s, double tau) {
  require_positive_tau(tau);
  const SiteKernel kernel(s, tau);
  const auto& g = s.geometry();
  FormField out(g, 0, ValueShape::matrix(s.rank()));
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) kernel(x).psi.store(out.at(0, x));
  });
  return out;
}

double vortex_functional(const FieldState& s, double tau) { return ymh(s, tau).moment_sq; }

IdentityResidual energy_identity_residual(const FieldState& s, double tau) {
  const EnergyReport r = ymh(s, tau);
  IdentityResidual out;
  out.absolute = r.identity_residual;
  out.relative = r.ymh_total != 0.0 ? std::abs(r.identity_residual) / r.ymh_total : std::abs(r.identity_residual);
  return out;
}

}  // namespace kvf
