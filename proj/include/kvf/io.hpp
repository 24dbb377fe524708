#pragma once

// Serialisation of traces, states and metric solutions.
//
// trace.csv: header `t,ymh,vortex_fn,sup_phi_sq,sup_ehat,sup_lambdaF,dbar_residual,
// f02_residual,moment_inf_norm,dt_used`, one row per record, 17 significant digits.
//
// final_state.bin (little-endian):
//   "KVF1", u32 {m, N, n, d}, f64 {L, tau, t_final},
//   A: for each direction, for each site, for each matrix entry (row-major) re, im,
//   phi: for each site, for each entry re, im.
//
// u_star.bin (little-endian):
//   "KVU1", u32 {m, N, n, d}, f64 {L, tau}, u: for each site one f64.
//
// Sites are ordered with axis 0 fastest.

#include <string>

#include "kvf/bundle.hpp"
#include "kvf/diagnostics.hpp"
#include "kvf/flow.hpp"

namespace kvf {

class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kTraceHeader =
    "t,ymh,vortex_fn,sup_phi_sq,sup_ehat,sup_lambdaF,dbar_residual,f02_residual,moment_inf_norm,dt_used";

/// Formats a double with 17 significant digits.
std::string format_double(double v);

std::string trace_to_csv(const DiagnosticsTrace& trace);
DiagnosticsTrace trace_from_csv(const std::string& text);
void write_trace_csv(const std::string& path, const DiagnosticsTrace& trace);
DiagnosticsTrace read_trace_csv(const std::string& path);

struct StoredState {
  FieldState state;
  double tau = 0.0;
  double t = 0.0;
};
void write_state(const std::string& path, const FieldState& s, double tau, double t);
/// Reads a state file; the stencil order is not stored and must be supplied.
StoredState read_state(const std::string& path, StencilOrder order = StencilOrder::fourth);

void write_u_star(const std::string& path, const MetricState& ms, double tau);
/// Returns u as a 0-form over the stored geometry together with tau.
std::pair<FormField, double> read_u_star(const std::string& path, StencilOrder order = StencilOrder::fourth);

/// Writes `text` to `path`, replacing any existing file.
void write_text(const std::string& path, const std::string& text);

}  // namespace kvf
