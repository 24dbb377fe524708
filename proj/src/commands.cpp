#include "kvf/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "kvf/conventions.hpp"
#include "kvf/diagnostics.hpp"
#include "kvf/energy.hpp"
#include "kvf/io.hpp"
#include "kvf/oracle.hpp"

namespace kvf {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Quantities below this level are treated as rounding noise by the refinement checks.
constexpr double kRoundingLevel = 1e-12;

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output_directory) / name).string();
}

void prepare_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_directory, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.output_directory + "': " + ec.message());
}

json base_summary(const RunConfig& cfg, const std::string& command) {
  json j;
  j["command"] = command;
  j["status"] = "ok";
  j["convention_version"] = std::string(convention_version());
  j["convention_hash"] = std::string(convention_hash());
  json c = json::object();
  for (const auto& [k, v] : cfg.resolved()) c[k] = v;
  j["config"] = c;
  return j;
}

void write_summary(const RunConfig& cfg, const json& j) { write_text(out_path(cfg, "summary.json"), j.dump(2) + "\n"); }

json energies_json(const EnergyReport& e) {
  return json{{"ymh_total", e.ymh_total},     {"term_F", e.term_F},       {"term_dphi", e.term_dphi},
              {"term_quartic", e.term_quartic}, {"moment_sq", e.moment_sq}, {"term_F02", e.term_F02},
              {"term_dbar", e.term_dbar},     {"topo_const", e.topo_const}, {"identity_residual", e.identity_residual}};
}

json row_json(const TraceRow& r) {
  return json{{"t", r.t},
              {"ymh", r.ymh},
              {"vortex_fn", r.vortex_fn},
              {"sup_phi_sq", r.sup_phi_sq},
              {"sup_phi", std::sqrt(r.sup_phi_sq)},
              {"sup_ehat", r.sup_ehat},
              {"sup_lambdaF", r.sup_lambdaF},
              {"sup_i_lambdaF", r.sup_i_lambdaF},
              {"dbar_residual", r.dbar_residual},
              {"f02_residual", r.f02_residual},
              {"moment_inf_norm", r.moment_inf_norm},
              {"dt_used", r.dt_used}};
}

json verdict_json(const MonitorVerdict& v) {
  return json{{"pass", v.pass}, {"margin", v.margin}, {"first_violation", v.first_violation}, {"detail", v.detail}};
}

json monitors_json(const RunConfig& cfg, const DiagnosticsTrace& trace, const std::vector<double>& energies,
                   double energy_tol) {
  json m;
  m["energy_monotone"] = verdict_json(check_energy_monotone(energies, energy_tol));
  m["max_principle_phi"] = verdict_json(check_max_principle_phi(trace, cfg.tau, cfg.monitor_tolerance));
  m["ehat_monotone"] = verdict_json(check_ehat_monotone(trace, cfg.monitor_tolerance));
  m["lambdaF_bounded"] = verdict_json(check_lambdaF_bounded(trace, cfg.tau, cfg.monitor_tolerance));
  m["holomorphy"] = verdict_json(check_holomorphy(trace, 2.0, 1e-8));
  return m;
}

// Threshold data and the closed-form target the final state should approach.
json threshold_json(const RunConfig& cfg, const FieldState& final_state, const EnergyReport& e,
                    const TraceRow& last) {
  json j;
  const auto spec = cfg.bundle();
  const auto geom = final_state.geometry();
  j["topo_const"] = e.topo_const;
  if (spec.rank != 1 || geom.complex_dim() != 1) {
    j["target"] = "vortex";
    j["target_energy"] = e.topo_const;
    j["ymh_relative_error"] = std::abs(e.ymh_total - e.topo_const) / std::max(std::abs(e.topo_const), 1e-300);
    return j;
  }
  const auto b = bradlow_check(spec, geom, cfg.tau);
  j["bradlow"] = json{{"threshold", b.threshold}, {"feasible", b.feasible}, {"borderline", b.borderline},
                      {"margin", b.margin}};
  const double plateau = plateau_energy(spec, geom, cfg.tau);
  j["plateau_energy"] = plateau;
  if (b.feasible && spec.degree != 0) {
    const double rel = std::abs(e.ymh_total - e.topo_const) / std::abs(e.topo_const);
    j["target"] = "vortex";
    j["target_energy"] = e.topo_const;
    j["ymh_relative_error"] = rel;
    j["target_met"] = last.moment_inf_norm <= 1e-3 && rel <= 1e-2;
  } else if (!b.feasible) {
    const double rel = std::abs(e.ymh_total - plateau) / plateau;
    j["target"] = "plateau";
    j["target_energy"] = plateau;
    j["ymh_relative_error"] = rel;
    j["target_met"] = std::sqrt(last.sup_phi_sq) <= 1e-2 && rel <= 1e-2;
  } else {
    j["target"] = "vortex";
    j["target_energy"] = e.topo_const;
    j["moment_inf_norm"] = last.moment_inf_norm;
  }
  return j;
}

// Human-readable console formatting; the files carry full precision.
std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

int run_command(const RunConfig& cfg, std::ostream& out) {
  const FieldState s0 = initial_state(cfg);
  prepare_output(cfg);
  json summary = base_summary(cfg, "run");
  summary["initial_energies"] = energies_json(ymh(s0, cfg.tau));
  const FlowSchedule schedule = cfg.schedule();

  if (cfg.engine == "metric") {
    MetricFlowResult r;
    try {
      r = integrate_metric_flow(MetricState(s0), cfg.tau, schedule, cfg.flow_method());
    } catch (const InstabilityError& e) {
      summary["status"] = "diverged";
      summary["error"] = e.what();
      write_summary(cfg, summary);
      out << "run: metric flow diverged: " << e.what() << "\n";
      return kExitDivergence;
    }
    const FieldState fin = reconstruct_pair(r.final_state);
    const EnergyReport e = ymh(fin, cfg.tau);
    std::vector<double> energies;
    for (const auto& row : r.trace) energies.push_back(row.ymh);
    write_trace_csv(out_path(cfg, "trace.csv"), r.trace);
    write_state(out_path(cfg, "final_state.bin"), fin, cfg.tau, r.t_final);
    summary["run"] = json{{"engine", "metric"}, {"t_final", r.t_final}, {"steps", r.steps},
                          {"rejected", r.rejected}, {"converged", r.converged}};
    summary["energies"] = energies_json(e);
    summary["final"] = row_json(r.trace.back());
    summary["monitors"] = monitors_json(cfg, r.trace, energies, cfg.monitor_tolerance);
    summary["threshold"] = threshold_json(cfg, fin, e, r.trace.back());
    write_summary(cfg, summary);
    out << "run: metric flow to t = " << fmt(r.t_final) << " in " << r.steps << " steps; ymh = " << fmt(e.ymh_total)
        << ", sup|Psi| = " << fmt(r.trace.back().moment_inf_norm) << "\n";
    return kExitOk;
  }

  // Direct flow. The observer keeps a partial trace and the last recorded state so
  // that a failed run still leaves usable artifacts behind.
  DiagnosticsTrace partial;
  FieldState last_recorded = s0;
  double last_t = 0.0;
  long snapshot_counter = 0;
  auto observer = [&](const TraceRow& row, const FieldState& s) {
    partial.push_back(row);
    last_recorded = s;
    last_t = row.t;
    if (cfg.snapshot_every > 0 && snapshot_counter++ % cfg.snapshot_every == 0) {
      std::ostringstream name;
      name << "snapshot_" << std::setw(6) << std::setfill('0') << (partial.size() - 1) << ".bin";
      write_state(out_path(cfg, name.str()), s, cfg.tau, row.t);
    }
  };
  FlowResult r;
  try {
    r = integrate(s0, cfg.tau, schedule, cfg.flow_method(), observer);
  } catch (const DivergenceError& e) {
    write_trace_csv(out_path(cfg, "trace.csv"), e.trace());
    write_state(out_path(cfg, "final_state.bin"), e.last_good(), cfg.tau, e.time());
    summary["status"] = "diverged";
    summary["error"] = e.what();
    summary["run"] = json{{"engine", "direct"}, {"t_final", e.time()}};
    write_summary(cfg, summary);
    out << "run: diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const InstabilityError& e) {
    write_trace_csv(out_path(cfg, "trace.csv"), partial);
    write_state(out_path(cfg, "final_state.bin"), last_recorded, cfg.tau, last_t);
    summary["status"] = "diverged";
    summary["error"] = e.what();
    summary["monitor"] = e.monitor();
    summary["run"] = json{{"engine", "direct"}, {"t_final", last_t}};
    write_summary(cfg, summary);
    out << "run: diverged: " << e.what() << "\n";
    return kExitDivergence;
  }
  const EnergyReport e = ymh(r.final_state, cfg.tau);
  write_trace_csv(out_path(cfg, "trace.csv"), r.trace);
  write_state(out_path(cfg, "final_state.bin"), r.final_state, cfg.tau, r.t_final);
  summary["run"] = json{{"engine", "direct"}, {"t_final", r.t_final}, {"steps", r.steps},
                        {"rejected", r.rejected}, {"converged", r.converged}};
  summary["energies"] = energies_json(e);
  summary["final"] = row_json(r.trace.back());
  summary["monitors"] = monitors_json(cfg, r.trace, r.step_energies, 1e-12);
  summary["threshold"] = threshold_json(cfg, r.final_state, e, r.trace.back());
  write_summary(cfg, summary);
  out << "run: direct flow to t = " << fmt(r.t_final) << " in " << r.steps << " steps (" << r.rejected
      << " rejected); ymh = " << fmt(e.ymh_total) << ", sup|Psi| = " << fmt(r.trace.back().moment_inf_norm) << "\n";
  return kExitOk;
}

int check_gradient_command(const RunConfig& cfg, std::ostream& out) {
  const FieldState s = initial_state(cfg);
  prepare_output(cfg);
  const auto sample = random_coordinates(s, static_cast<std::size_t>(cfg.check_samples), cfg.check_seed);
  const auto rep = fd_gradient(s, cfg.tau, cfg.check_epsilon, sample);
  double max_analytic = 0.0;
  for (double a : rep.analytic) max_analytic = std::max(max_analytic, std::abs(a));
  // Relative to the gradient scale, but never to a scale below one energy unit, so
  // that a vanishing gradient (a critical point) is judged by its absolute deviation.
  const double deviation = rep.max_abs_deviation / std::max(max_analytic, 1.0);
  const bool pass = deviation <= cfg.check_tolerance;
  json summary = base_summary(cfg, "check-gradient");
  summary["status"] = pass ? "pass" : "fail";
  summary["gradient"] = json{{"samples", rep.sample.size()},
                             {"epsilon", cfg.check_epsilon},
                             {"max_abs_deviation", rep.max_abs_deviation},
                             {"max_abs_analytic", max_analytic},
                             {"max_relative_deviation", rep.max_relative_deviation},
                             {"deviation", deviation},
                             {"tolerance", cfg.check_tolerance}};
  write_summary(cfg, summary);
  out << "check-gradient: " << rep.sample.size() << " coordinates, eps = " << fmt(cfg.check_epsilon)
      << "\n  max |fd - analytic| = " << fmt(rep.max_abs_deviation) << "\n  max |analytic| = " << fmt(max_analytic)
      << "\n  deviation = " << fmt(deviation) << " (tolerance " << fmt(cfg.check_tolerance) << ") "
      << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

int energy_identity_command(const RunConfig& cfg, std::ostream& out) {
  RunConfig fine = cfg;
  fine.N = 2 * cfg.N;
  validate_config(fine);
  const FieldState coarse_state = initial_state(cfg);
  const FieldState fine_state = initial_state(fine);
  prepare_output(cfg);
  const auto rc = energy_identity_residual(coarse_state, cfg.tau);
  const auto rf = energy_identity_residual(fine_state, cfg.tau);
  const bool rounding = rc.relative <= kRoundingLevel && rf.relative <= kRoundingLevel;
  const double order = (rc.relative > 0.0 && rf.relative > 0.0) ? std::log2(rc.relative / rf.relative) : 0.0;
  const bool pass = rounding || order >= cfg.identity_min_order;
  json summary = base_summary(cfg, "energy-identity");
  summary["status"] = pass ? "pass" : "fail";
  summary["identity"] = json{{"N", cfg.N},
                             {"residual_N", rc.relative},
                             {"absolute_N", rc.absolute},
                             {"N_fine", fine.N},
                             {"residual_2N", rf.relative},
                             {"absolute_2N", rf.absolute},
                             {"order", order},
                             {"rounding_level", rounding},
                             {"min_order", cfg.identity_min_order}};
  write_summary(cfg, summary);
  out << "energy-identity: relative residual " << fmt(rc.relative) << " (N = " << cfg.N << "), " << fmt(rf.relative)
      << " (N = " << fine.N << ")\n  observed order = " << fmt(order);
  if (rounding) out << " (both residuals at rounding level)";
  out << "\n  " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

int compare_flows_command(const RunConfig& cfg, std::ostream& out) {
  if (cfg.n != 1 || cfg.m != 1 || cfg.d < 1 || cfg.init_kind != "theta")
    throw ConfigError("compare-flows requires n = 1, m = 1, d >= 1 and init.kind = theta");
  const FieldState s0 = initial_state(cfg);
  prepare_output(cfg);
  FlowSchedule schedule = cfg.schedule();
  schedule.vortex_tol = 0.0;  // both flows must cover the same time interval
  const FlowResult direct = integrate(s0, cfg.tau, schedule, cfg.flow_method());
  const MetricFlowResult metric = integrate_metric_flow(MetricState(s0), cfg.tau, schedule, cfg.flow_method());

  // Metric-flow rows are linearly interpolated onto the direct-flow record times;
  // each discrepancy is taken relative to the largest value of that quantity along
  // the direct trajectory.
  auto interp = [&](double t, double TraceRow::*field) {
    const auto& tr = metric.trace;
    if (t <= tr.front().t) return tr.front().*field;
    for (std::size_t i = 1; i < tr.size(); ++i) {
      if (t <= tr[i].t) {
        const double w = (t - tr[i - 1].t) / (tr[i].t - tr[i - 1].t);
        return (1.0 - w) * (tr[i - 1].*field) + w * (tr[i].*field);
      }
    }
    return tr.back().*field;
  };
  struct Quantity {
    const char* name;
    double TraceRow::*field;
    double scale = 0.0;
    double worst = 0.0;
    double worst_t = 0.0;
  };
  Quantity qs[] = {{"ymh", &TraceRow::ymh}, {"sup_phi_sq", &TraceRow::sup_phi_sq},
                   {"sup_i_lambdaF", &TraceRow::sup_i_lambdaF}};
  for (auto& q : qs)
    for (const auto& row : direct.trace) q.scale = std::max(q.scale, std::abs(row.*(q.field)));
  std::string csv = "t,ymh_direct,ymh_metric,sup_phi_sq_direct,sup_phi_sq_metric,sup_i_lambdaF_direct,"
                    "sup_i_lambdaF_metric\n";
  const double t_metric_end = metric.trace.back().t;
  for (const auto& row : direct.trace) {
    if (row.t > t_metric_end * (1.0 + 1e-12)) break;
    csv += format_double(row.t);
    for (auto& q : qs) {
      const double a = row.*(q.field);
      const double b = interp(row.t, q.field);
      const double rel = std::abs(a - b) / std::max(q.scale, 1e-300);
      if (rel > q.worst) {
        q.worst = rel;
        q.worst_t = row.t;
      }
      csv += "," + format_double(a) + "," + format_double(b);
    }
    csv += "\n";
  }
  write_text(out_path(cfg, "compare.csv"), csv);
  double worst = 0.0;
  for (const auto& q : qs) worst = std::max(worst, q.worst);
  const bool pass = worst <= cfg.compare_tolerance;
  json summary = base_summary(cfg, "compare-flows");
  summary["status"] = pass ? "pass" : "fail";
  json d = json::object();
  for (const auto& q : qs) d[q.name] = json{{"max_relative_discrepancy", q.worst}, {"at_t", q.worst_t}, {"scale", q.scale}};
  summary["discrepancy"] = d;
  summary["max_discrepancy"] = worst;
  summary["tolerance"] = cfg.compare_tolerance;
  summary["direct"] = json{{"t_final", direct.t_final}, {"steps", direct.steps}, {"rejected", direct.rejected},
                           {"final", row_json(direct.trace.back())}};
  summary["metric"] = json{{"t_final", metric.t_final}, {"steps", metric.steps}, {"rejected", metric.rejected},
                           {"final", row_json(metric.trace.back())}};
  write_summary(cfg, summary);
  out << "compare-flows: t in [0, " << fmt(direct.t_final) << "]\n";
  for (const auto& q : qs)
    out << "  " << q.name << ": max relative discrepancy " << fmt(q.worst) << " at t = " << fmt(q.worst_t) << "\n";
  out << "  " << (pass ? "PASS" : "FAIL") << " (tolerance " << fmt(cfg.compare_tolerance) << ")\n";
  return pass ? kExitOk : kExitCheckFailed;
}

int kw_solve_command(const RunConfig& cfg, std::ostream& out) {
  if (cfg.n != 1 || cfg.m != 1) throw ConfigError("kw-solve requires n = 1 and m = 1");
  const FieldState base = initial_state(cfg);
  prepare_output(cfg);
  json summary = base_summary(cfg, "kw-solve");
  KwOptions opts;
  opts.tol = cfg.kw_tol;
  opts.max_iter = cfg.kw_max_iter;
  KwResult r;
  try {
    r = kw_solve(base, cfg.tau, opts);
  } catch (const InfeasibleError& e) {
    summary["status"] = "infeasible";
    summary["threshold"] = json{{"tau", cfg.tau}, {"threshold", e.threshold()}, {"margin", cfg.tau - e.threshold()}};
    summary["error"] = e.what();
    write_summary(cfg, summary);
    out << "kw-solve: infeasible: tau = " << fmt(cfg.tau) << " <= threshold " << fmt(e.threshold()) << "\n";
    return kExitInfeasible;
  } catch (const NonConvergence& e) {
    summary["status"] = "not_converged";
    summary["error"] = e.what();
    write_summary(cfg, summary);
    out << "kw-solve: " << e.what() << "\n";
    return kExitDivergence;
  }
  write_u_star(out_path(cfg, "u_star.bin"), r.state, cfg.tau);
  std::string hist = "iteration,residual\n";
  for (std::size_t i = 0; i < r.residual_history.size(); ++i)
    hist += std::to_string(i) + "," + format_double(r.residual_history[i]) + "\n";
  write_text(out_path(cfg, "kw_history.csv"), hist);
  double u_min = INFINITY, u_max = -INFINITY;
  for (const cplx& z : r.state.u.data()) {
    u_min = std::min(u_min, z.real());
    u_max = std::max(u_max, z.real());
  }
  summary["kw"] = json{{"iterations", r.iterations}, {"residual", r.residual},
                       {"moment_residual", r.moment_residual}, {"threshold", r.threshold},
                       {"tol", cfg.kw_tol},       {"u_min", u_min},
                       {"u_max", u_max},          {"residual_history", r.residual_history}};
  summary["energies"] = energies_json(ymh(reconstruct_pair(r.state), cfg.tau));
  write_summary(cfg, summary);
  out << "kw-solve: converged in " << r.iterations << " iterations; residual " << fmt(r.residual)
      << ", sup|Psi| = " << fmt(r.moment_residual) << ", threshold " << fmt(r.threshold) << "\n";
  return kExitOk;
}

int dispatch(const std::string& command, const std::string& config_path, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    validate_config(cfg);
  } catch (const Error& e) {
    err << "kvf: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    if (command == "run") return run_command(cfg, out);
    if (command == "check-gradient") return check_gradient_command(cfg, out);
    if (command == "energy-identity") return energy_identity_command(cfg, out);
    if (command == "compare-flows") return compare_flows_command(cfg, out);
    if (command == "kw-solve") return kw_solve_command(cfg, out);
    err << "kvf: unknown command '" << command << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "kvf: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "kvf: precondition failed: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedTopology& e) {
    err << "kvf: unsupported topology: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleError& e) {
    err << "kvf: infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const InstabilityError& e) {
    err << "kvf: numerical divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const NonConvergence& e) {
    err << "kvf: no convergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const Error& e) {
    err << "kvf: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

}  // namespace kvf
