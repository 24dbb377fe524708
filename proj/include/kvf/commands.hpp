#pragma once

// Batch subcommands behind the kvf executable. Each takes a validated RunConfig,
// writes its artifacts under output.directory and returns a process exit code.

#include <iosfwd>
#include <string>

#include "kvf/config.hpp"

namespace kvf {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,  // a check ran to completion but missed its threshold, or I/O failed
  kExitConfig = 2,       // configuration or precondition error; no artifacts written
  kExitDivergence = 3,   // numerical divergence or non-convergence; partial artifacts kept
  kExitInfeasible = 4,   // tau at or below the stationary solver's threshold
};

int run_command(const RunConfig& cfg, std::ostream& out);
int check_gradient_command(const RunConfig& cfg, std::ostream& out);
int energy_identity_command(const RunConfig& cfg, std::ostream& out);
int compare_flows_command(const RunConfig& cfg, std::ostream& out);
int kw_solve_command(const RunConfig& cfg, std::ostream& out);

/// Loads and validates the config, runs `command` and maps library errors to exit codes.
int dispatch(const std::string& command, const std::string& config_path, std::ostream& out, std::ostream& err);

}  // namespace kvf
