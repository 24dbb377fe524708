#pragma once

// Runtime monitors: per-record trace rows and the checks that turn the flow's
// analytic properties (energy decay, maximum principle, Bochner-type decay of
// sup |Psi|^2, curvature bounds, holomorphy preservation) into pass/fail verdicts.

#include <string>
#include <vector>

#include "kvf/bundle.hpp"

namespace kvf {

struct TraceRow {
  double t = 0.0;
  double ymh = 0.0;
  double vortex_fn = 0.0;
  double sup_phi_sq = 0.0;
  double sup_ehat = 0.0;         // sup |Psi|^2
  double sup_lambdaF = 0.0;      // sup |Lambda F|
  double dbar_residual = 0.0;    // ||dbar_A phi||
  double f02_residual = 0.0;     // ||F^{0,2}||
  double moment_inf_norm = 0.0;  // sup |Psi|
  double dt_used = 0.0;
  double sup_i_lambdaF = 0.0;    // sup Re tr(i Lambda F)/rank (not serialized to the trace file)
};

using DiagnosticsTrace = std::vector<TraceRow>;

/// Evaluates every monitored quantity of a state in one pass over the sites.
TraceRow measure(const FieldState& s, double tau, double t = 0.0, double dt_used = 0.0);

/// Pointwise |Psi|^2 as a real scalar 0-form.
FormField ehat_field(const FieldState& s, double tau);

struct MonitorVerdict {
  bool pass = true;
  double margin = 0.0;          // smallest slack over the trace (negative when failing)
  long first_violation = -1;    // row index of the first failing row
  std::string detail;
};

/// sup|phi|^2 <= max(sup|phi_0|^2, tau) + tol on every row. The unsquared form
/// sup|phi| <= max(sup|phi_0|, tau) is evaluated as well and reported in `detail`.
MonitorVerdict check_max_principle_phi(const DiagnosticsTrace& trace, double tau, double tol = 1e-6);

/// sup ehat non-increasing between consecutive rows within rel_tol * sup ehat(0).
MonitorVerdict check_ehat_monotone(const DiagnosticsTrace& trace, double rel_tol = 1e-6);

/// sup|Lambda F| <= sup|Lambda F|(0) + sqrt(sup ehat(0)) + tau/2 + tol on every row.
MonitorVerdict check_lambdaF_bounded(const DiagnosticsTrace& trace, double tau, double tol = 1e-6);

/// E_{k+1} <= E_k + rel_tol * E_0 for a sequence of energies.
MonitorVerdict check_energy_monotone(const std::vector<double>& energies, double rel_tol = 1e-12);

/// ||dbar_A phi||(t) <= factor * ||dbar_A phi||(0) + abs_tol on every row.
MonitorVerdict check_holomorphy(const DiagnosticsTrace& trace, double factor = 2.0, double abs_tol = 1e-8);

struct BradlowReport {
  double threshold = 0.0;  // 4 pi d / L^2
  bool feasible = false;   // tau > threshold
  bool borderline = false; // tau == threshold up to rounding
  double margin = 0.0;     // tau - threshold
};

/// Rank 1, complex dimension 1 only.
BradlowReport bradlow_check(const BundleSpec& spec, const LatticeGeometry& geom, double tau);

}  // namespace kvf
