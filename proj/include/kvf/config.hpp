#pragma once

// Run configuration: a flat "key.path = value" text format.
//
//   # comment
//   geometry.N = 32
//   tau = 2.0
//
// Unknown or duplicated keys and malformed values are rejected with ConfigError.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kvf/bundle.hpp"
#include "kvf/error.hpp"
#include "kvf/flow.hpp"

namespace kvf {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  // geometry
  int m = 1;
  double L = 3.5449077018110318;  // sqrt(4 pi)
  int N = 32;
  int stencil_order = 4;
  // bundle
  int n = 1;
  int d = 1;
  double tau = 2.0;
  // initial data
  std::string init_kind = "theta";  // theta | constant | random
  double init_scale = 1.0;
  double init_amplitude = 0.3;          // random connection amplitude
  double init_section_amplitude = 1.0;  // random section amplitude
  double init_offset = 0.0;             // constant added to the random section factor
  std::uint64_t init_seed = 1;
  int init_band_limit = 2;
  int init_truncation = 6;
  // flow
  std::string engine = "direct";  // direct | metric
  std::string method = "rk4";     // euler | rk4
  double dt_init = 0.0;           // 0 selects cfl_factor * h^2
  double t_end = 20.0;
  double cfl_factor = 0.2;
  bool adapt = true;
  double vortex_tol = 1e-3;       // 0 disables early stopping
  // monitors
  double monitor_tolerance = 1e-6;
  double holomorphy_threshold = 1e-2;
  // output
  std::string output_directory = "kvf_out";
  int record_every = 50;
  int snapshot_every = 0;
  // stationary solver
  double kw_tol = 1e-10;
  int kw_max_iter = 100;
  // gradient check
  double check_epsilon = 1e-5;
  int check_samples = 50;
  std::uint64_t check_seed = 7;
  double check_tolerance = 1e-6;
  // energy identity
  double identity_min_order = 1.8;
  // flow comparison
  double compare_tolerance = 0.01;

  LatticeGeometry geometry() const;
  BundleSpec bundle() const;
  FlowSchedule schedule() const;
  Method flow_method() const;

  /// Every key with its resolved value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> resolved() const;
};

/// Parses config text; throws ConfigError with a line number on any problem.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Checks every module precondition that can be checked without allocating fields.
void validate_config(const RunConfig& cfg);

/// Builds the initial pair described by the init.* keys.
FieldState initial_state(const RunConfig& cfg);

}  // namespace kvf
