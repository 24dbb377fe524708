#pragma once

// Gradient flows.
//
// Direct flow of the Yang-Mills-Higgs energy:
//   dA/dt   = -(d_A^* F_A + J),            J = ah(d_A phi phi^*)
//   dphi/dt = -d_A^* d_A phi + 1/2 phi (tau - |phi|^2)
// The velocity is built from the exact discrete adjoints, so it equals -1/2 times
// the L^2 gradient of the discrete energy; in particular
// d/dt YMH = -2 ||velocity||^2 along the semi-discrete flow.
//
// Rank-1 metric (Donaldson) flow for h = exp(2u) over a frozen pair (A_0, phi_0):
//   du/dt = -i Psi(A_u, phi_u),  A_u = A_0 + (del - dbar) u,  phi_u = exp(u) phi_0,
// which reduces to du/dt = Re(-i Lambda F_0) + Lap u - 1/2 (|phi_0|^2 exp(2u) - tau).

#include <algorithm>
#include <functional>
#include <memory>
#include <vector>

#include "kvf/bundle.hpp"
#include "kvf/diagnostics.hpp"
#include "kvf/error.hpp"

namespace kvf {

/// A tangent vector (dA, dphi) to the space of pairs.
struct Tangent {
  FormField dA;
  FormField dphi;

  Tangent() = default;
  explicit Tangent(const FieldState& s)
      : dA(s.geometry(), 1, s.A().shape()), dphi(s.geometry(), 0, s.phi().shape()) {}
  Tangent& axpy(double a, const Tangent& o) {
    dA.axpy(a, o.dA);
    dphi.axpy(a, o.dphi);
    return *this;
  }
  double max_abs() const { return std::max(dA.max_abs(), dphi.max_abs()); }
};

/// Real L^2 pairing of two tangents.
double tangent_inner(const Tangent& a, const Tangent& b);
double tangent_norm(const Tangent& a);

/// s + a * v.
FieldState displace(const FieldState& s, const Tangent& v, double a);

/// Velocity of the direct flow (see header comment).
Tangent ymh_gradient(const FieldState& s, double tau);

/// Velocity of the moment-map flow: dA = i(dbar_A - del_A) Psi, dphi = -i Psi phi.
/// This is -1/2 times the L^2 gradient of ||Psi||^2 and agrees with ymh_gradient on
/// holomorphic pairs. Throws HolomorphyError when ||dbar_A phi|| > threshold * ||d_A phi||
/// or ||F^{0,2}|| > threshold * ||F||.
Tangent vortex_gradient(const FieldState& s, double tau, double holomorphy_threshold = 1e-2);

enum class Method { euler, rk4 };

/// One explicit step of the direct flow. Throws InstabilityError on non-finite output.
FieldState step(const FieldState& s, double tau, double dt, Method method);

struct FlowSchedule {
  double dt_init = 0.0;     // 0 selects cfl_factor * h^2
  double t_end = 1.0;
  double cfl_factor = 0.2;
  bool adapt = true;
  int record_every = 10;
  double vortex_tol = 0.0;  // stop once sup|Psi| <= vortex_tol at a record step (0 disables)
  long max_steps = 0;       // stop after this many accepted steps (0 disables)
};

/// Validates a schedule against a geometry and returns the initial step.
double resolve_initial_step(const FlowSchedule& schedule, const LatticeGeometry& geom);

struct FlowResult {
  FieldState final_state;
  DiagnosticsTrace trace;
  std::vector<double> step_energies;  // energy after every accepted step, starting with E(0)
  double t_final = 0.0;
  long steps = 0;
  long rejected = 0;
  bool converged = false;             // vortex_tol reached
};

/// Raised when adaptive halving drives dt below 1e-10 h^2; carries the last good state.
class DivergenceError : public InstabilityError {
 public:
  DivergenceError(const std::string& monitor, const std::string& what, FieldState last_good, double t,
                  DiagnosticsTrace trace)
      : InstabilityError(monitor, what),
        last_good_(std::make_shared<FieldState>(std::move(last_good))),
        t_(t),
        trace_(std::make_shared<DiagnosticsTrace>(std::move(trace))) {}
  const FieldState& last_good() const { return *last_good_; }
  double time() const { return t_; }
  const DiagnosticsTrace& trace() const { return *trace_; }

 private:
  std::shared_ptr<FieldState> last_good_;
  double t_;
  std::shared_ptr<DiagnosticsTrace> trace_;
};

/// Optional observer called on every recorded row.
using RecordObserver = std::function<void(const TraceRow&, const FieldState&)>;

/// Integrates the direct flow to t_end. Steps that raise the energy by more than
/// 1e-12 relative are rejected and dt is halved (when adapt is on).
FlowResult integrate(const FieldState& s, double tau, const FlowSchedule& schedule, Method method,
                     const RecordObserver& observer = {});

// --- rank-1 metric flow ------------------------------------------------------

struct MetricState {
  FieldState base;  // frozen (A_0, phi_0)
  FormField u;      // real scalar 0-form, h = exp(2u)

  MetricState() = default;
  /// u = 0 over `base`. Requires rank 1 and complex dimension 1.
  explicit MetricState(FieldState base);
};

/// du/dt for the rank-1 metric flow.
FormField metric_flow_rhs(const MetricState& ms, double tau);

/// The pair (A_0 + (del - dbar)u, exp(u) phi_0).
FieldState reconstruct_pair(const MetricState& ms);

struct MetricObservables {
  FormField phi_sq;     // |phi_0|^2 exp(2u)
  FormField i_lambdaF;  // i Lambda F_0 - Lap u
  double ymh = 0.0;     // energy of the reconstructed pair
};
MetricObservables metric_observables(const MetricState& ms, double tau);

/// Convex functional whose negative gradient is metric_flow_rhs:
/// 1/2 ||du||^2 + int (1/4 |phi_0|^2 exp(2u) - c u), c = Re(-i Lambda F_0) + tau/2.
double donaldson_functional(const MetricState& ms, double tau);

struct MetricFlowResult {
  MetricState final_state;
  DiagnosticsTrace trace;  // measured on the reconstructed pairs
  double t_final = 0.0;
  long steps = 0;
  long rejected = 0;
  bool converged = false;
};

/// Explicit integration of the metric flow with the same step control as integrate(),
/// using the Donaldson functional for step rejection.
MetricFlowResult integrate_metric_flow(const MetricState& ms, double tau, const FlowSchedule& schedule,
                                       Method method);

}  // namespace kvf
