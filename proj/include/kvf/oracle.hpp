#pragma once

// Independent reference computations: a central-difference gradient of the
// discrete energy, the stationary rank-1 (Kazdan-Warner type) solver for the
// metric flow, a spectral bound for its linearisation, and closed-form energies.

#include <cstdint>
#include <string>
#include <vector>

#include "kvf/bundle.hpp"
#include "kvf/flow.hpp"

namespace kvf {

/// One real coordinate of a pair. For the connection, `basis` indexes a real basis
/// of u(n): i E_jj (j < n), then for each j < k the pair E_jk - E_kj, i(E_jk + E_kj).
/// For the section, `basis` = 2 * entry + (0 real | 1 imaginary).
struct Coordinate {
  enum class Field { connection, section };
  Field field = Field::section;
  int comp = 0;
  std::size_t site = 0;
  int basis = 0;
};

/// Adds `amount` times the coordinate's basis element to the state.
void perturb(FieldState& s, const Coordinate& c, double amount);

/// Deterministic random sample of coordinates.
std::vector<Coordinate> random_coordinates(const FieldState& s, std::size_t count, std::uint64_t seed);

struct FdGradientReport {
  std::vector<Coordinate> sample;
  std::vector<double> fd;        // (E(s + eps e) - E(s - eps e)) / (2 eps)
  std::vector<double> analytic;  // directional derivative implied by ymh_gradient: -2 <velocity, e>
  double max_abs_deviation = 0.0;
  double max_relative_deviation = 0.0;  // max |fd - analytic| / max |analytic|
};

/// Requires eps in [1e-7, 1e-3] and a nonempty sample.
FdGradientReport fd_gradient(const FieldState& s, double tau, double eps, const std::vector<Coordinate>& sample);

struct KwOptions {
  double tol = 1e-10;
  int max_iter = 100;
  const FormField* initial = nullptr;  // starting u (defaults to 0)
};

struct KwResult {
  MetricState state;
  std::vector<double> residual_history;  // sup |metric_flow_rhs| per Newton iterate
  int iterations = 0;
  double residual = 0.0;
  double moment_residual = 0.0;          // sup |Psi| of the reconstructed pair
  double threshold = 0.0;                // Bradlow-type threshold of the base
};

/// Damped Newton iteration for metric_flow_rhs(u) = 0 over `base`.
/// Throws InfeasibleError when int (Re(-i Lambda F_0) + tau/2) <= 0 and NonConvergence
/// (with the residual history in the message) after max_iter iterations.
KwResult kw_solve(const FieldState& base, double tau, const KwOptions& opts = {});

/// kw_solve preceded by a continuation in tau from a comfortably feasible value.
KwResult kw_solve_continuation(const FieldState& base, double tau, const KwOptions& opts = {}, int stages = 8);

/// Largest eigenvalue of the linearisation of metric_flow_rhs at u, by block inverse
/// iteration with Rayleigh-Ritz on its negative (a symmetric positive definite operator).
/// Stops when the eigen-residual falls below tol times the eigenvalue.
double linearization_max_eigenvalue(const MetricState& ms, double tau, int max_iter = 200, double tol = 1e-10);

/// Same quantity by plain power iteration on the shifted operator sigma I + J;
/// stops when the eigen-residual falls below tol * sigma. Slow; intended for small
/// grids as a cross-check.
double linearization_max_eigenvalue_power(const MetricState& ms, double tau, int max_iter = 2000000,
                                          double tol = 1e-10);

/// 4 pi^2 d^2 / L^2 + tau^2 L^2 / 4: energy of the constant-curvature pair with phi = 0.
double plateau_energy(const BundleSpec& spec, const LatticeGeometry& geom, double tau);

/// Closed form of |phi|^2(t) for spatially constant data on the trivial line bundle.
double constant_data_phi_sq(double phi0_sq, double tau, double t);

}  // namespace kvf
