#include "kvf/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace kvf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (...) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  if (pos != v.size() || !std::isfinite(out)) throw ConfigError("expected a finite number, got '" + v + "'");
  return out;
}

long long parse_int(const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("expected on/off, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"geometry.m", [](RunConfig& c, const std::string& v) { c.m = static_cast<int>(parse_int(v)); }},
      {"geometry.L", [](RunConfig& c, const std::string& v) { c.L = parse_double(v); }},
      {"geometry.area",
       [](RunConfig& c, const std::string& v) {
         const double a = parse_double(v);
         if (!(a > 0.0)) throw ConfigError("geometry.area must be positive");
         c.L = std::sqrt(a);
       }},
      {"geometry.N", [](RunConfig& c, const std::string& v) { c.N = static_cast<int>(parse_int(v)); }},
      {"geometry.stencil_order",
       [](RunConfig& c, const std::string& v) { c.stencil_order = static_cast<int>(parse_int(v)); }},
      {"bundle.n", [](RunConfig& c, const std::string& v) { c.n = static_cast<int>(parse_int(v)); }},
      {"bundle.d", [](RunConfig& c, const std::string& v) { c.d = static_cast<int>(parse_int(v)); }},
      {"tau", [](RunConfig& c, const std::string& v) { c.tau = parse_double(v); }},
      {"init.kind", [](RunConfig& c, const std::string& v) { c.init_kind = v; }},
      {"init.scale", [](RunConfig& c, const std::string& v) { c.init_scale = parse_double(v); }},
      {"init.amplitude", [](RunConfig& c, const std::string& v) { c.init_amplitude = parse_double(v); }},
      {"init.section_amplitude",
       [](RunConfig& c, const std::string& v) { c.init_section_amplitude = parse_double(v); }},
      {"init.offset", [](RunConfig& c, const std::string& v) { c.init_offset = parse_double(v); }},
      {"init.seed", [](RunConfig& c, const std::string& v) { c.init_seed = parse_uint(v); }},
      {"init.band_limit",
       [](RunConfig& c, const std::string& v) { c.init_band_limit = static_cast<int>(parse_int(v)); }},
      {"init.truncation",
       [](RunConfig& c, const std::string& v) { c.init_truncation = static_cast<int>(parse_int(v)); }},
      {"flow.engine", [](RunConfig& c, const std::string& v) { c.engine = v; }},
      {"flow.method", [](RunConfig& c, const std::string& v) { c.method = v; }},
      {"flow.dt_init", [](RunConfig& c, const std::string& v) { c.dt_init = parse_double(v); }},
      {"flow.t_end", [](RunConfig& c, const std::string& v) { c.t_end = parse_double(v); }},
      {"flow.cfl_factor", [](RunConfig& c, const std::string& v) { c.cfl_factor = parse_double(v); }},
      {"flow.adapt", [](RunConfig& c, const std::string& v) { c.adapt = parse_bool(v); }},
      {"flow.vortex_tol", [](RunConfig& c, const std::string& v) { c.vortex_tol = parse_double(v); }},
      {"monitors.tolerance", [](RunConfig& c, const std::string& v) { c.monitor_tolerance = parse_double(v); }},
      {"monitors.holomorphy_threshold",
       [](RunConfig& c, const std::string& v) { c.holomorphy_threshold = parse_double(v); }},
      {"output.directory", [](RunConfig& c, const std::string& v) { c.output_directory = v; }},
      {"output.record_every",
       [](RunConfig& c, const std::string& v) { c.record_every = static_cast<int>(parse_int(v)); }},
      {"output.snapshot_every",
       [](RunConfig& c, const std::string& v) { c.snapshot_every = static_cast<int>(parse_int(v)); }},
      {"kw.tol", [](RunConfig& c, const std::string& v) { c.kw_tol = parse_double(v); }},
      {"kw.max_iter", [](RunConfig& c, const std::string& v) { c.kw_max_iter = static_cast<int>(parse_int(v)); }},
      {"check.epsilon", [](RunConfig& c, const std::string& v) { c.check_epsilon = parse_double(v); }},
      {"check.samples",
       [](RunConfig& c, const std::string& v) { c.check_samples = static_cast<int>(parse_int(v)); }},
      {"check.seed", [](RunConfig& c, const std::string& v) { c.check_seed = parse_uint(v); }},
      {"check.tolerance", [](RunConfig& c, const std::string& v) { c.check_tolerance = parse_double(v); }},
      {"identity.min_order",
       [](RunConfig& c, const std::string& v) { c.identity_min_order = parse_double(v); }},
      {"compare.tolerance", [](RunConfig& c, const std::string& v) { c.compare_tolerance = parse_double(v); }},
  };
  return table;
}

}  // namespace

LatticeGeometry RunConfig::geometry() const {
  return build_torus(m, L, N, stencil_order == 2 ? StencilOrder::second : StencilOrder::fourth);
}

BundleSpec RunConfig::bundle() const { return BundleSpec{n, d}; }

FlowSchedule RunConfig::schedule() const {
  FlowSchedule s;
  s.dt_init = dt_init;
  s.t_end = t_end;
  s.cfl_factor = cfl_factor;
  s.adapt = adapt;
  s.record_every = record_every;
  s.vortex_tol = vortex_tol;
  return s;
}

Method RunConfig::flow_method() const { return method == "euler" ? Method::euler : Method::rk4; }

std::vector<std::pair<std::string, std::string>> RunConfig::resolved() const {
  return {
      {"geometry.m", std::to_string(m)},
      {"geometry.L", fmt(L)},
      {"geometry.N", std::to_string(N)},
      {"geometry.stencil_order", std::to_string(stencil_order)},
      {"bundle.n", std::to_string(n)},
      {"bundle.d", std::to_string(d)},
      {"tau", fmt(tau)},
      {"init.kind", init_kind},
      {"init.scale", fmt(init_scale)},
      {"init.amplitude", fmt(init_amplitude)},
      {"init.section_amplitude", fmt(init_section_amplitude)},
      {"init.offset", fmt(init_offset)},
      {"init.seed", std::to_string(init_seed)},
      {"init.band_limit", std::to_string(init_band_limit)},
      {"init.truncation", std::to_string(init_truncation)},
      {"flow.engine", engine},
      {"flow.method", method},
      {"flow.dt_init", fmt(dt_init)},
      {"flow.t_end", fmt(t_end)},
      {"flow.cfl_factor", fmt(cfl_factor)},
      {"flow.adapt", adapt ? "on" : "off"},
      {"flow.vortex_tol", fmt(vortex_tol)},
      {"monitors.tolerance", fmt(monitor_tolerance)},
      {"monitors.holomorphy_threshold", fmt(holomorphy_threshold)},
      {"output.directory", output_directory},
      {"output.record_every", std::to_string(record_every)},
      {"output.snapshot_every", std::to_string(snapshot_every)},
      {"kw.tol", fmt(kw_tol)},
      {"kw.max_iter", std::to_string(kw_max_iter)},
      {"check.epsilon", fmt(check_epsilon)},
      {"check.samples", std::to_string(check_samples)},
      {"check.seed", std::to_string(check_seed)},
      {"check.tolerance", fmt(check_tolerance)},
      {"identity.min_order", fmt(identity_min_order)},
      {"compare.tolerance", fmt(compare_tolerance)},
  };
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (seen.count(key))
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first set on line " +
                        std::to_string(seen[key]) + ")");
    seen[key] = lineno;
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + " (" + key + "): " + e.what());
    }
  }
  if (seen.count("geometry.L") && seen.count("geometry.area"))
    throw ConfigError("geometry.L and geometry.area are mutually exclusive");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.m != 1 && c.m != 2) fail("geometry.m must be 1 or 2");
  if (!(c.L > 0.0)) fail("geometry.L must be positive");
  if (c.N < 4 || c.N % 2 != 0) fail("geometry.N must be even and at least 4");
  if (c.stencil_order != 2 && c.stencil_order != 4) fail("geometry.stencil_order must be 2 or 4");
  if (c.n != 1 && c.n != 2) fail("bundle.n must be 1 or 2");
  if (c.d != 0 && (c.m != 1 || c.n != 1)) fail("bundle.d != 0 requires geometry.m = 1 and bundle.n = 1");
  if (!(c.tau > 0.0)) fail("tau must be positive");
  if (c.init_kind == "theta") {
    if (c.n != 1 || c.m != 1 || c.d < 1) fail("init.kind = theta requires n = 1, m = 1, d >= 1");
    if (c.init_truncation < 0) fail("init.truncation must be non-negative");
  } else if (c.init_kind == "constant") {
    if (c.d != 0) fail("init.kind = constant requires d = 0");
  } else if (c.init_kind == "random") {
    if (c.init_band_limit < 0 || c.init_band_limit > c.N / 4) fail("init.band_limit must lie in [0, N/4]");
  } else {
    fail("init.kind must be theta, constant or random");
  }
  if (c.engine != "direct" && c.engine != "metric") fail("flow.engine must be direct or metric");
  if (c.engine == "metric" && (c.n != 1 || c.m != 1)) fail("flow.engine = metric requires n = 1 and m = 1");
  if (c.method != "euler" && c.method != "rk4") fail("flow.method must be euler or rk4");
  if (!(c.cfl_factor > 0.0)) fail("flow.cfl_factor must be positive");
  if (!(c.t_end >= 0.0)) fail("flow.t_end must be non-negative");
  const double h = c.L / c.N;
  if (c.dt_init < 0.0 || c.dt_init > c.cfl_factor * h * h * (1.0 + 1e-12))
    fail("flow.dt_init must lie in [0, cfl_factor * h^2]");
  if (c.vortex_tol < 0.0) fail("flow.vortex_tol must be non-negative");
  if (!(c.monitor_tolerance >= 0.0)) fail("monitors.tolerance must be non-negative");
  if (!(c.holomorphy_threshold > 0.0)) fail("monitors.holomorphy_threshold must be positive");
  if (c.output_directory.empty()) fail("output.directory must not be empty");
  if (c.record_every < 1) fail("output.record_every must be at least 1");
  if (c.snapshot_every < 0) fail("output.snapshot_every must be non-negative");
  if (!(c.kw_tol > 0.0) || c.kw_max_iter < 1) fail("kw.tol must be positive and kw.max_iter at least 1");
  if (!(c.check_epsilon >= 1e-7 && c.check_epsilon <= 1e-3)) fail("check.epsilon must lie in [1e-7, 1e-3]");
  if (c.check_samples < 1) fail("check.samples must be at least 1");
  if (!(c.check_tolerance > 0.0)) fail("check.tolerance must be positive");
  if (!(c.compare_tolerance > 0.0)) fail("compare.tolerance must be positive");
}

FieldState initial_state(const RunConfig& c) {
  const auto geom = c.geometry();
  const auto spec = c.bundle();
  FieldState s(spec, geom);
  if (c.init_kind == "theta") {
    s.phi() = theta_section(spec, geom, c.init_truncation);
  } else if (c.init_kind == "constant") {
    for (std::size_t x = 0; x < geom.site_count(); ++x) s.phi().at(0, x)[0] = 1.0;
  } else {
    RandomOptions o;
    o.connection_amplitude = c.init_amplitude;
    o.section_amplitude = c.init_section_amplitude;
    o.section_offset = c.init_offset;
    s = random_state(spec, geom, c.init_seed, c.init_band_limit, o);
  }
  s.phi() *= c.init_scale;
  return s;
}

}  // namespace kvf
