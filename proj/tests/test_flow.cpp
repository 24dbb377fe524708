#include <doctest.h>

#include <cmath>

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

FieldState theta_state(const LatticeGeometry& g, int d = 1) {
  FieldState s({1, d}, g);
  s.phi() = theta_section({1, d}, g);
  return s;
}

Tangent random_tangent(const FieldState& s, std::uint64_t seed) {
  Tangent v(s);
  v.dA = anti_hermitian(smooth_field(s.geometry(), 1, s.A().shape(), seed, 2));
  v.dphi = smooth_field(s.geometry(), 0, s.phi().shape(), seed + 1, 2);
  return v;
}

double sup_distance(const FieldState& a, const FieldState& b) {
  return std::max((a.A() - b.A()).max_abs(), (a.phi() - b.phi()).max_abs());
}

}  // namespace

TEST_CASE("ymh gradient vanishes at critical points") {
  const auto g = build_torus(1, 2.0, 16);
  CHECK(ymh_gradient(constant_section(g, std::sqrt(1.5)), 1.5).max_abs() <= 1e-14);
  const auto v = ymh_gradient(background_state({1, 1}, g), 1.0);
  CHECK(v.dphi.max_abs() == 0.0);
  CHECK(v.dA.max_abs() <= 1e-13);
  CHECK(ymh_gradient(background_state({2, 0}, g), 1.0).max_abs() == 0.0);
}

TEST_CASE("ymh gradient is exact: directional derivatives match finite differences") {
  for (BundleSpec spec : {BundleSpec{1, 1}, BundleSpec{2, 0}}) {
    const auto g = build_torus(1, kStandardL, 16);
    const auto s = random_state(spec, g, 5, 2);
    const double tau = 1.7;
    const auto vel = ymh_gradient(s, tau);
    const double gnorm = tangent_norm(vel);
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 50; ++k) {
      const auto v = random_tangent(s, 100 + 2 * k);
      const double eps = 1e-5;
      const double fd = (ymh(displace(s, v, eps), tau).ymh_total - ymh(displace(s, v, -eps), tau).ymh_total) / (2 * eps);
      // the velocity is -1/2 of the L^2 gradient
      const double analytic = -2.0 * tangent_inner(vel, v);
      worst = std::max(worst, std::abs(fd - analytic) / (tangent_norm(v) * (1.0 + gnorm)));
    }
    MESSAGE("rank " << spec.rank << ": worst normalised directional deviation " << worst);
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("vortex gradient: zero at vortices, holomorphy precondition, agreement on holomorphic data") {
  const auto g0 = build_torus(1, 2.0, 16);
  CHECK(vortex_gradient(constant_section(g0, std::sqrt(2.0)), 2.0).max_abs() <= 1e-14);
  const auto bg = vortex_gradient(background_state({1, 1}, g0), 1.0);
  CHECK(bg.dphi.max_abs() == 0.0);
  CHECK_THROWS_AS(vortex_gradient(random_state({1, 0}, g0, 3, 2), 1.0), HolomorphyError);

  std::vector<double> rel;
  for (int N : {16, 32, 64}) {
    const auto g = build_torus(1, kStandardL, N);
    const auto s = theta_state(g);
    const auto a = vortex_gradient(s, 2.0);
    const auto b = ymh_gradient(s, 2.0);
    Tangent diff = a;
    diff.axpy(-1.0, b);
    rel.push_back(tangent_norm(diff) / tangent_norm(b));
  }
  MESSAGE("vortex vs ymh gradient " << rel[0] << " " << rel[1] << " " << rel[2]);
  CHECK(converges(rel));
}

TEST_CASE("step: fixed points and instability reporting") {
  const auto g = build_torus(1, 2.0, 8);
  const auto v = constant_section(g, std::sqrt(2.0));
  for (Method m : {Method::euler, Method::rk4}) CHECK(sup_distance(step(v, 2.0, 1e-3, m), v) <= 1e-15);
  CHECK_THROWS_AS(step(v, 2.0, 0.0, Method::rk4), InvalidArgument);
  const auto r = random_state({1, 0}, g, 4, 2);
  CHECK_THROWS_AS(step(r, 2.0, 1e9, Method::rk4), InstabilityError);
}

TEST_CASE("euler step is first-order consistent with the energy decay law") {
  const auto g = build_torus(1, kStandardL, 16);
  const auto s = random_state({1, 1}, g, 6, 2);
  const double tau = 2.0;
  const double E0 = ymh(s, tau).ymh_total;
  const double rate = -2.0 * std::pow(tangent_norm(ymh_gradient(s, tau)), 2);
  std::vector<double> err;
  for (double dt : {1e-4, 5e-5, 2.5e-5}) {
    const double dE = ymh(step(s, tau, dt, Method::euler), tau).ymh_total - E0;
    CHECK(dE < 0.0);
    err.push_back(std::abs(dE - dt * rate));
  }
  const auto orders = observed_orders(err);
  MESSAGE("euler consistency orders " << orders[0] << " " << orders[1]);
  for (double o : orders) CHECK(o == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("rk4 converges at fourth order in dt") {
  const auto g = build_torus(1, kStandardL, 16);
  const auto s = random_state({1, 1}, g, 7, 2);
  const double tau = 2.0;
  const double h = g.spacing();
  const double T = 0.2 * h * h * 4;
  auto run = [&](int steps, Method m) {
    FieldState cur = s;
    for (int k = 0; k < steps; ++k) cur = step(cur, tau, T / steps, m);
    return cur;
  };
  const auto a = run(4, Method::rk4), b = run(8, Method::rk4), c = run(16, Method::rk4);
  const double d1 = sup_distance(a, b), d2 = sup_distance(b, c);
  MESSAGE("rk4 self-convergence order " << std::log2(d1 / d2));
  CHECK(std::log2(d1 / d2) >= 3.5);
  // at equal dt rk4 is much closer to the converged solution than euler
  const auto ref = run(64, Method::rk4);
  CHECK(sup_distance(run(8, Method::rk4), ref) < 1e-3 * sup_distance(run(8, Method::euler), ref));
}

TEST_CASE("schedule validation") {
  const auto g = build_torus(1, 2.0, 8);
  FlowSchedule s;
  CHECK(resolve_initial_step(s, g) == doctest::Approx(0.2 * 0.25 * 0.25));
  s.dt_init = 0.01;
  CHECK(resolve_initial_step(s, g) == 0.01);
  s.dt_init = 0.02;
  CHECK_THROWS_AS(resolve_initial_step(s, g), InvalidArgument);
  s.dt_init = 0.0;
  s.record_every = 0;
  CHECK_THROWS_AS(resolve_initial_step(s, g), InvalidArgument);
}

TEST_CASE("constant data relaxes to the vortex phi = sqrt(tau)") {
  const auto g = build_torus(1, 2.0, 8);
  const double tau = 2.0;
  FlowSchedule sch;
  sch.t_end = 14.0;
  sch.record_every = 20;
  const auto r = integrate(constant_section(g, 2.0 * std::sqrt(tau)), tau, sch, Method::rk4);
  CHECK(r.trace.back().moment_inf_norm <= 1e-8);
  CHECK(std::abs(r.final_state.phi().at(0, 3)[0] - std::sqrt(tau)) <= 1e-8);
  CHECK(r.t_final == doctest::Approx(14.0));
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].t > r.trace[k - 1].t);
}

TEST_CASE("energy is non-increasing along adaptive trajectories") {
  const auto g = build_torus(1, kStandardL, 16);
  FlowSchedule sch;
  sch.t_end = 0.5;
  sch.record_every = 5;
  for (BundleSpec spec : {BundleSpec{1, 1}, BundleSpec{2, 0}}) {
    const auto r = integrate(random_state(spec, g, 8, 3), 1.5, sch, Method::rk4);
    for (std::size_t k = 1; k < r.step_energies.size(); ++k)
      CHECK(r.step_energies[k] <= r.step_energies[k - 1] + 1e-12 * std::abs(r.step_energies[0]));
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].ymh <= r.trace[k - 1].ymh);
    CHECK(r.steps + 1 == static_cast<long>(r.step_energies.size()));
  }
}

TEST_CASE("trajectories depend continuously on initial data") {
  const auto g = build_torus(1, kStandardL, 16);
  const auto s = random_state({1, 1}, g, 9, 2);
  auto s2 = s;
  for (cplx& z : s2.phi().data()) z += 1e-6;
  FlowSchedule sch;
  sch.t_end = 1.0;
  sch.record_every = 1000;
  const auto a = integrate(s, 2.0, sch, Method::rk4);
  const auto b = integrate(s2, 2.0, sch, Method::rk4);
  CHECK(sup_distance(a.final_state, b.final_state) <= 1e-4);
}

TEST_CASE("integration is deterministic and stops at the vortex tolerance") {
  const auto g = build_torus(1, 2.0, 8);
  FlowSchedule sch;
  sch.t_end = 30.0;
  sch.record_every = 5;
  sch.vortex_tol = 1e-3;
  const auto s = constant_section(g, 0.3);
  const auto a = integrate(s, 1.0, sch, Method::rk4);
  const auto b = integrate(s, 1.0, sch, Method::rk4);
  CHECK(a.converged);
  CHECK(a.t_final < 30.0);
  CHECK(a.trace.back().moment_inf_norm <= 1e-3);
  CHECK(sup_distance(a.final_state, b.final_state) == 0.0);
  CHECK(a.trace.size() == b.trace.size());
}

TEST_CASE("metric flow right-hand side") {
  const auto g = build_torus(1, 2.0, 16);
  // u = 0 over a vortex: stationary
  CHECK(metric_flow_rhs(MetricState(constant_section(g, std::sqrt(1.3))), 1.3).max_abs() <= 1e-15);
  // phi_0 = 0, d = 0: constant tau / 2
  const auto r = metric_flow_rhs(MetricState(background_state({1, 0}, g)), 1.3);
  for (std::size_t x = 0; x < g.site_count(); ++x) CHECK(std::abs(r.at(0, x)[0] - 0.65) <= 1e-15);
  CHECK_THROWS_AS(MetricState(background_state({2, 0}, g)), InvalidArgument);
  CHECK_THROWS_AS(MetricState(background_state({1, 0}, build_torus(2, 1.0, 4))), InvalidArgument);
}

TEST_CASE("metric flow rhs equals -i Psi of the reconstructed pair") {
  const auto g = build_torus(1, kStandardL, 32);
  MetricState ms(theta_state(g));
  ms.u = real_part(smooth_field(g, 0, ValueShape::scalar(), 10, 2));
  ms.u *= 0.3;
  const double tau = 2.0;
  const auto rhs = metric_flow_rhs(ms, tau);
  const auto psi = moment_map(reconstruct_pair(ms), tau);
  double err = 0.0;
  for (std::size_t x = 0; x < g.site_count(); ++x)
    err = std::max(err, std::abs(rhs.at(0, x)[0] - cplx(0.0, -1.0) * psi.at(0, x)[0]));
  CHECK(err <= 1e-12);
}

TEST_CASE("metric observables") {
  const auto g = build_torus(1, kStandardL, 16);
  const double tau = 2.0;
  const auto base = random_state({1, 1}, g, 11, 2);
  MetricState ms(base);
  const auto o0 = metric_observables(ms, tau);
  CHECK(o0.ymh == doctest::Approx(ymh(base, tau).ymh_total).epsilon(1e-13));
  for (std::size_t x = 0; x < g.site_count(); ++x)
    CHECK(o0.phi_sq.at(0, x)[0].real() == doctest::Approx(std::norm(base.phi().at(0, x)[0])).epsilon(1e-14));
  const auto rec0 = reconstruct_pair(ms);
  CHECK(sup_distance(rec0, base) <= 1e-15);

  for (cplx& z : ms.u.data()) z = 0.4;
  const auto oc = metric_observables(ms, tau);
  CHECK((oc.i_lambdaF - o0.i_lambdaF).max_abs() <= 1e-13);
  for (std::size_t x = 0; x < g.site_count(); ++x)
    CHECK(oc.phi_sq.at(0, x)[0].real() == doctest::Approx(std::exp(0.8) * o0.phi_sq.at(0, x)[0].real()).epsilon(1e-13));

  ms.u = real_part(smooth_field(g, 0, ValueShape::scalar(), 12, 3));
  const auto o = metric_observables(ms, tau);
  double flux = 0.0;
  for (std::size_t x = 0; x < g.site_count(); ++x) flux += o.i_lambdaF.at(0, x)[0].real() * g.cell_volume();
  CHECK(flux / (2.0 * kPi) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(o.ymh == doctest::Approx(ymh(reconstruct_pair(ms), tau).ymh_total).epsilon(1e-13));
}

TEST_CASE("metric flow: fixed point over a vortex and Donaldson functional decay") {
  const auto g = build_torus(1, 2.0, 8);
  FlowSchedule sch;
  sch.t_end = 2.0;
  sch.record_every = 10;
  const auto fixed = integrate_metric_flow(MetricState(constant_section(g, std::sqrt(1.5))), 1.5, sch, Method::rk4);
  CHECK(fixed.final_state.u.max_abs() <= 1e-10);

  const auto g2 = build_torus(1, kStandardL, 16);
  MetricState ms(theta_state(g2));
  double prev = donaldson_functional(ms, 2.0);
  const double h = g2.spacing();
  for (int k = 0; k < 20; ++k) {
    FlowSchedule one;
    one.t_end = 0.2 * h * h * 5;
    one.record_every = 100;
    ms = integrate_metric_flow(ms, 2.0, one, Method::rk4).final_state;
    const double cur = donaldson_functional(ms, 2.0);
    CHECK(cur <= prev + 1e-12 * std::abs(prev));
    prev = cur;
  }
}
