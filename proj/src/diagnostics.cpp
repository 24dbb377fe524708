#include "kvf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "kvf/energy.hpp"
#include "kvf/error.hpp"
#include "kvf/parallel.hpp"

namespace kvf {

namespace {

// Per-block sums and maxima combined in block order, independent of thread count.
struct Reduction {
  std::vector<double> sums;
  std::vector<double> maxima;
};

template <class SiteFn>
Reduction reduce_sites(std::size_t count, int nsum, int nmax, SiteFn&& fn) {
  const std::size_t blocks = (count + kSiteBlock - 1) / kSiteBlock;
  const int width = nsum + nmax;
  std::vector<double> partial(blocks * width, 0.0);
  for (std::size_t b = 0; b < blocks; ++b)
    for (int k = nsum; k < width; ++k) partial[b * width + k] = -std::numeric_limits<double>::infinity();
  parallel_blocks(count, [&](std::size_t begin, std::size_t end) {
    double* acc = partial.data() + (begin / kSiteBlock) * width;
    for (std::size_t x = begin; x < end; ++x) fn(x, acc, acc + nsum);
  });
  Reduction r{std::vector<double>(nsum, 0.0), std::vector<double>(nmax, -std::numeric_limits<double>::infinity())};
  for (std::size_t b = 0; b < blocks; ++b) {
    for (int k = 0; k < nsum; ++k) r.sums[k] += partial[b * width + k];
    for (int k = 0; k < nmax; ++k) r.maxima[k] = std::max(r.maxima[k], partial[b * width + nsum + k]);
  }
  return r;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

TraceRow measure(const FieldState& s, double tau, double t, double dt_used) {
  const SiteKernel kernel(s, tau);
  const auto& g = s.geometry();
  auto r = reduce_sites(g.site_count(), 6, 4, [&](std::size_t x, double* sum, double* mx) {
    const SiteTerms st = kernel(x);
    sum[0] += st.F_sq;
    sum[1] += st.dphi_sq;
    sum[2] += st.quartic;
    sum[3] += st.moment_sq;
    sum[4] += st.dbar_sq;
    sum[5] += st.f02_sq;
    mx[0] = std::max(mx[0], st.phi_sq);
    mx[1] = std::max(mx[1], st.moment_sq);
    mx[2] = std::max(mx[2], st.lambdaF_norm);
    mx[3] = std::max(mx[3], st.i_lambdaF);
  });
  const double w = g.cell_volume();
  TraceRow row;
  row.t = t;
  row.dt_used = dt_used;
  row.ymh = (r.sums[0] + r.sums[1] + r.sums[2]) * w;
  row.vortex_fn = r.sums[3] * w;
  row.dbar_residual = std::sqrt(r.sums[4] * w);
  row.f02_residual = std::sqrt(r.sums[5] * w);
  row.sup_phi_sq = r.maxima[0];
  row.sup_ehat = r.maxima[1];
  row.moment_inf_norm = std::sqrt(r.maxima[1]);
  row.sup_lambdaF = r.maxima[2];
  row.sup_i_lambdaF = r.maxima[3];
  return row;
}

FormField ehat_field(const FieldState& s, double tau) {
  const SiteKernel kernel(s, tau);
  const auto& g = s.geometry();
  FormField out(g, 0, ValueShape::scalar());
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) *out.at(0, x) = kernel(x).moment_sq;
  });
  return out;
}

namespace {

// Generic "value_i <= bound_i" scan.
template <class Bound, class Value>
MonitorVerdict scan(std::size_t rows, std::size_t first, Bound&& bound, Value&& value) {
  MonitorVerdict v;
  v.margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < rows; ++i) {
    const double slack = bound(i) - value(i);
    if (!(slack >= 0.0) && v.pass) {
      v.pass = false;
      v.first_violation = static_cast<long>(i);
    }
    v.margin = std::min(v.margin, std::isnan(slack) ? -std::numeric_limits<double>::infinity() : slack);
  }
  if (rows <= first) v.margin = 0.0;
  return v;
}

}  // namespace

MonitorVerdict check_max_principle_phi(const DiagnosticsTrace& trace, double tau, double tol) {
  if (trace.empty()) return {};
  const double bound = std::max(trace.front().sup_phi_sq, tau) + tol;
  auto v = scan(trace.size(), 0, [&](std::size_t) { return bound; },
                [&](std::size_t i) { return trace[i].sup_phi_sq; });
  const double bound_unsquared = std::max(std::sqrt(trace.front().sup_phi_sq), tau) + tol;
  auto u = scan(trace.size(), 0, [&](std::size_t) { return bound_unsquared; },
                [&](std::size_t i) { return std::sqrt(trace[i].sup_phi_sq); });
  v.detail = "squared form: " + std::string(v.pass ? "pass" : "fail") + " (margin " + fmt(v.margin) +
             "); unsquared form: " + (u.pass ? "pass" : "fail") + " (margin " + fmt(u.margin) + ")";
  return v;
}

MonitorVerdict check_ehat_monotone(const DiagnosticsTrace& trace, double rel_tol) {
  if (trace.empty()) return {};
  const double allowed = rel_tol * trace.front().sup_ehat;
  auto v = scan(trace.size(), 1, [&](std::size_t i) { return trace[i - 1].sup_ehat + allowed; },
                [&](std::size_t i) { return trace[i].sup_ehat; });
  v.detail = "allowed per-row increase " + fmt(allowed);
  return v;
}

MonitorVerdict check_lambdaF_bounded(const DiagnosticsTrace& trace, double tau, double tol) {
  if (trace.empty()) return {};
  const double bound = trace.front().sup_lambdaF + std::sqrt(trace.front().sup_ehat) + 0.5 * tau + tol;
  auto v = scan(trace.size(), 0, [&](std::size_t) { return bound; },
                [&](std::size_t i) { return trace[i].sup_lambdaF; });
  v.detail = "bound " + fmt(bound);
  return v;
}

MonitorVerdict check_energy_monotone(const std::vector<double>& energies, double rel_tol) {
  if (energies.empty()) return {};
  const double allowed = rel_tol * std::abs(energies.front());
  auto v = scan(energies.size(), 1, [&](std::size_t i) { return energies[i - 1] + allowed; },
                [&](std::size_t i) { return energies[i]; });
  v.detail = "allowed per-step increase " + fmt(allowed);
  return v;
}

MonitorVerdict check_holomorphy(const DiagnosticsTrace& trace, double factor, double abs_tol) {
  if (trace.empty()) return {};
  const double bound = factor * trace.front().dbar_residual + abs_tol;
  auto v = scan(trace.size(), 0, [&](std::size_t) { return bound; },
                [&](std::size_t i) { return trace[i].dbar_residual; });
  v.detail = "bound " + fmt(bound);
  return v;
}

BradlowReport bradlow_check(const BundleSpec& spec, const LatticeGeometry& geom, double tau) {
  if (spec.rank != 1 || geom.complex_dim() != 1)
    throw InvalidArgument("bradlow_check: rank 1, complex dimension 1 only");
  BradlowReport r;
  const double L = geom.length();
  r.threshold = 4.0 * std::numbers::pi * spec.degree / (L * L);
  r.margin = tau - r.threshold;
  r.borderline = std::abs(r.margin) <= 1e-12 * std::max(1.0, std::abs(r.threshold));
  r.feasible = r.margin > 0.0 && !r.borderline;
  return r;
}

}  // namespace kvf
