#include <doctest.h>

#include <cmath>

#include "kvf/diagnostics.hpp"
#include "kvf/energy.hpp"
#include "kvf/error.hpp"
#include "kvf/flow.hpp"
#include "support.hpp"

using namespace kvf;
using namespace kvf::testing;

namespace {

FieldState constant_section(const LatticeGeometry& g, cplx value) {
  FieldState s({1, 0}, g);
  for (std::size_t x = 0; x < g.site_count(); ++x) s.phi().at(0, x)[0] = value;
  return s;
}

FieldState theta_state(const LatticeGeometry& g, double scale = 1.0) {
  FieldState s({1, 1}, g);
  s.phi() = theta_section({1, 1}, g);
  s.phi() *= scale;
  return s;
}

DiagnosticsTrace run(const FieldState& s, double tau, double t_end, int record_every = 10) {
  FlowSchedule sch;
  sch.t_end = t_end;
  sch.record_every = record_every;
  return integrate(s, tau, sch, Method::rk4).trace;
}

DiagnosticsTrace synthetic(std::initializer_list<double> values, double TraceRow::*field) {
  DiagnosticsTrace t;
  double time = 0.0;
  for (double v : values) {
    TraceRow r;
    r.t = time;
    time += 1.0;
    r.*field = v;
    t.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("ehat field closed forms") {
  const auto g = build_torus(1, 2.0, 8);
  CHECK(ehat_field(constant_section(g, std::sqrt(2.0)), 2.0).max_abs() <= 1e-28);
  const auto e = ehat_field(background_state({1, 0}, g), 1.0);
  for (std::size_t x = 0; x < g.site_count(); ++x) CHECK(e.at(0, x)[0].real() == doctest::Approx(0.25).epsilon(1e-15));
  const auto s = random_state({2, 0}, build_torus(1, kStandardL, 16), 1, 2);
  const auto row = measure(s, 1.5);
  CHECK(row.sup_ehat == doctest::Approx(row.moment_inf_norm * row.moment_inf_norm).epsilon(1e-14));
  CHECK(row.sup_ehat == doctest::Approx(ehat_field(s, 1.5).max_abs()).epsilon(1e-14));
}

TEST_CASE("measure agrees with the energy module") {
  const auto g = build_torus(1, kStandardL, 16);
  const auto s = random_state({1, 1}, g, 2, 2);
  const auto row = measure(s, 2.0, 0.5, 1e-3);
  const auto e = ymh(s, 2.0);
  CHECK(row.t == 0.5);
  CHECK(row.dt_used == 1e-3);
  CHECK(row.ymh == doctest::Approx(e.ymh_total).epsilon(1e-13));
  CHECK(row.vortex_fn == doctest::Approx(e.moment_sq).epsilon(1e-13));
  CHECK(row.dbar_residual == doctest::Approx(std::sqrt(e.term_dbar / 2.0)).epsilon(1e-12));
  CHECK(row.sup_lambdaF == doctest::Approx(lambda_contract(curvature(s)).max_abs()).epsilon(1e-13));
  double sup_phi_sq = 0.0;
  for (const cplx& z : s.phi().data()) sup_phi_sq = std::max(sup_phi_sq, std::norm(z));
  CHECK(row.sup_phi_sq == doctest::Approx(sup_phi_sq).epsilon(1e-14));
  const auto LF = lambda_contract(curvature(s));
  double sup_iLF = -1e300;
  for (std::size_t x = 0; x < g.site_count(); ++x)
    sup_iLF = std::max(sup_iLF, (cplx(0.0, 1.0) * LF.at(0, x)[0]).real());
  CHECK(row.sup_i_lambdaF == doctest::Approx(sup_iLF).epsilon(1e-13));
  // deterministic
  const auto again = measure(s, 2.0, 0.5, 1e-3);
  CHECK(again.ymh == row.ymh);
  CHECK(again.sup_ehat == row.sup_ehat);
}

TEST_CASE("maximum principle monitor") {
  const auto g = build_torus(1, 2.0, 8);
  const double tau = 1.5;
  {
    const auto tr = run(constant_section(g, 2.0 * std::sqrt(tau)), tau, 3.0);
    const auto v = check_max_principle_phi(tr, tau);
    CHECK(v.pass);
    CHECK(v.margin >= 0.0);
    for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr[k].sup_phi_sq < tr[k - 1].sup_phi_sq);
    CHECK(tr.back().sup_phi_sq > tau);
    CHECK(v.detail.find("unsquared") != std::string::npos);
  }
  {
    const auto tr = run(constant_section(g, 0.5 * std::sqrt(tau)), tau, 3.0);
    const auto v = check_max_principle_phi(tr, tau);
    CHECK(v.pass);
    for (const auto& r : tr) CHECK(r.sup_phi_sq <= tau + 1e-6);
  }
  {
    const auto tr = run(constant_section(g, std::sqrt(tau)), tau, 1.0);
    CHECK(check_max_principle_phi(tr, tau).pass);
    for (const auto& r : tr) CHECK(r.sup_phi_sq == doctest::Approx(tau).epsilon(1e-14));
  }
  const auto bad = synthetic({1.0, 1.2, 1.6, 1.4}, &TraceRow::sup_phi_sq);
  const auto v = check_max_principle_phi(bad, 1.5, 1e-6);
  CHECK_FALSE(v.pass);
  CHECK(v.first_violation == 2);
  CHECK(v.margin < 0.0);
}

TEST_CASE("Bochner monitor: sup ehat is non-increasing") {
  const auto g = build_torus(1, 2.0, 8);
  const auto vortex = run(constant_section(g, std::sqrt(1.5)), 1.5, 1.0);
  CHECK(check_ehat_monotone(vortex).pass);
  for (const auto& r : vortex) CHECK(r.sup_ehat <= 1e-28);

  const auto gs = build_torus(1, kStandardL, 16);
  CHECK(check_ehat_monotone(run(theta_state(gs), 2.0, 2.0)).pass);
  CHECK(check_ehat_monotone(run(constant_section(g, 3.0), 1.0, 2.0)).pass);

  const auto bad = synthetic({1.0, 0.9, 0.95}, &TraceRow::sup_ehat);
  const auto v = check_ehat_monotone(bad, 1e-6);
  CHECK_FALSE(v.pass);
  CHECK(v.first_violation == 2);
}

TEST_CASE("curvature bound monitor") {
  const auto g = build_torus(1, 2.0, 8);
  const auto gs = build_torus(1, kStandardL, 16);
  CHECK(check_lambdaF_bounded(run(constant_section(g, 2.0), 1.0, 2.0), 1.0).pass);
  CHECK(check_lambdaF_bounded(run(theta_state(gs), 2.0, 2.0), 2.0).pass);
  CHECK(check_lambdaF_bounded(run(theta_state(gs), 0.5, 2.0), 0.5).pass);
  CHECK(check_lambdaF_bounded(run(constant_section(g, std::sqrt(2.0)), 2.0, 1.0), 2.0).pass);
  RandomOptions hot;
  hot.connection_amplitude = 2.0;
  hot.section_amplitude = 3.0;
  CHECK(check_lambdaF_bounded(run(random_state({2, 0}, gs, 3, 3, hot), 1.0, 0.5, 5), 1.0).pass);

  DiagnosticsTrace bad = synthetic({1.0, 2.0, 9.0}, &TraceRow::sup_lambdaF);
  bad[0].sup_ehat = 1.0;
  const auto v = check_lambdaF_bounded(bad, 2.0);
  CHECK_FALSE(v.pass);
  CHECK(v.first_violation == 2);
}

TEST_CASE("energy and holomorphy monitors") {
  CHECK(check_energy_monotone({3.0, 2.0, 2.0, 1.0}).pass);
  const auto v = check_energy_monotone({3.0, 2.0, 2.5}, 1e-12);
  CHECK_FALSE(v.pass);
  CHECK(v.first_violation == 2);
  CHECK(check_energy_monotone({3.0, 3.0 + 1e-13}, 1e-12).pass);

  const auto ok = synthetic({1e-4, 1.5e-4, 1.9e-4}, &TraceRow::dbar_residual);
  CHECK(check_holomorphy(ok).pass);
  const auto bad = synthetic({1e-4, 2.5e-4}, &TraceRow::dbar_residual);
  CHECK_FALSE(check_holomorphy(bad).pass);

  const auto gs = build_torus(1, kStandardL, 16);
  CHECK(check_holomorphy(run(theta_state(gs), 2.0, 2.0)).pass);
}

TEST_CASE("monitors are pure functions of the trace") {
  const auto gs = build_torus(1, kStandardL, 16);
  const auto tr = run(theta_state(gs), 2.0, 1.0);
  const auto a = check_ehat_monotone(tr), b = check_ehat_monotone(tr);
  CHECK(a.pass == b.pass);
  CHECK(a.margin == b.margin);
  CHECK(a.detail == b.detail);
  const auto c = check_max_principle_phi(tr, 2.0), d = check_max_principle_phi(tr, 2.0);
  CHECK(c.margin == d.margin);
}

TEST_CASE("Bradlow feasibility") {
  const auto g = build_torus(1, kStandardL, 16);
  const auto f = bradlow_check({1, 1}, g, 2.0);
  CHECK(f.threshold == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.feasible);
  CHECK_FALSE(f.borderline);
  CHECK(f.margin == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_FALSE(bradlow_check({1, 1}, g, 0.5).feasible);
  const auto edge = bradlow_check({1, 1}, g, 4.0 * kPi / (kStandardL * kStandardL));
  CHECK(edge.borderline);
  CHECK_FALSE(edge.feasible);
  CHECK(bradlow_check({1, 0}, g, 0.01).feasible);
  CHECK(bradlow_check({1, 2}, g, 2.0).threshold == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(bradlow_check({2, 0}, g, 1.0), InvalidArgument);
  CHECK_THROWS_AS(bradlow_check({1, 0}, build_torus(2, 1.0, 4), 1.0), InvalidArgument);
}
