// kvf: batch front end for the connection/section flows.
//
//   kvf run --config run.cfg
//   kvf check-gradient --config check.cfg
//   kvf energy-identity | compare-flows | kw-solve --config <path>
//
// KVF_THREADS caps the number of worker threads.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kvf/commands.hpp"
#include "kvf/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kvf: connection/section gradient flows on lattice tori"};
  app.require_subcommand(1);
  std::string config_path;
  struct Entry {
    const char* name;
    const char* help;
  };
  const Entry entries[] = {
      {"run", "integrate a flow and write trace.csv, final_state.bin and summary.json"},
      {"check-gradient", "compare the analytic gradient with central finite differences"},
      {"energy-identity", "measure the convergence order of the energy identity residual at N and 2N"},
      {"compare-flows", "run the direct and metric flows from the same data and compare them"},
      {"kw-solve", "solve the stationary rank-1 metric equation by damped Newton iteration"},
  };
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", config_path, "configuration file (key.path = value)")->required();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kvf::kExitConfig;
  }
  kvf::configure_threads_from_env();
  const std::string command = app.get_subcommands().front()->get_name();
  return kvf::dispatch(command, config_path, std::cout, std::cerr);
}
