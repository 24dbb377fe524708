#include "kvf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kvf/energy.hpp"
#include "kvf/error.hpp"
#include "kvf/parallel.hpp"

namespace kvf {

namespace {

const cplx kI(0.0, 1.0);

double energy_tolerance(double e) { return 1e-12 * std::max(std::abs(e), 1e-300); }

}  // namespace

double tangent_inner(const Tangent& a, const Tangent& b) { return inner(a.dA, b.dA) + inner(a.dphi, b.dphi); }

double tangent_norm(const Tangent& a) { return std::sqrt(std::max(0.0, tangent_inner(a, a))); }

FieldState displace(const FieldState& s, const Tangent& v, double a) {
  FieldState out = s;
  out.A().axpy(a, v.dA);
  out.phi().axpy(a, v.dphi);
  return out;
}

Tangent ymh_gradient(const FieldState& s, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  const auto& g = s.geometry();
  const int n = s.rank();
  const FormField F = curvature(s);
  const FormField Dphi = covariant_d(s);
  Tangent v(s);
  v.dA = end_codifferential(s, F);
  v.dphi = section_codifferential(s, Dphi);
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) {
      const Vec phi = s.phi_at(x);
      for (int mu = 0; mu < g.real_dim(); ++mu) {
        Mat a = Mat::load(v.dA.at(mu, x), n);
        a += anti_hermitian_part(outer(Vec::load(Dphi.at(mu, x), n), phi));
        (cplx(-1.0) * a).store(v.dA.at(mu, x));
      }
      Vec p = Vec::load(v.dphi.at(0, x), n);
      const double phi_sq = phi.norm2();
      Vec out = cplx(-1.0) * p + (0.5 * (tau - phi_sq)) * phi;
      out.store(v.dphi.at(0, x));
    }
  });
  return v;
}

Tangent vortex_gradient(const FieldState& s, double tau, double holomorphy_threshold) {
  const EnergyReport r = ymh(s, tau);
  const double dbar_norm = std::sqrt(0.5 * r.term_dbar);
  const double f02_norm = std::sqrt(0.25 * r.term_F02);
  if (dbar_norm > holomorphy_threshold * std::sqrt(r.term_dphi) ||
      f02_norm > holomorphy_threshold * std::sqrt(r.term_F))
    throw HolomorphyError("vortex_gradient: pair is not holomorphic within the configured threshold (||dbar phi|| = " +
                          std::to_string(dbar_norm) + ", ||F02|| = " + std::to_string(f02_norm) + ")");
  const auto& g = s.geometry();
  const int n = s.rank();
  const int D = g.real_dim();
  const FormField psi = moment_map(s, tau);
  const FormField Dpsi = end_covariant_d(s, psi);
  const auto& P01 = type_projector(D, 0, 1);
  const auto& P10 = type_projector(D, 1, 0);
  Tangent v(s);
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) {
      for (int mu = 0; mu < D; ++mu) {
        Mat a = Mat::zero(n);
        for (int nu = 0; nu < D; ++nu) {
          const cplx c = kI * (P01[mu * D + nu] - P10[mu * D + nu]);
          if (c != cplx(0.0)) a += c * Mat::load(Dpsi.at(nu, x), n);
        }
        a.store(v.dA.at(mu, x));
      }
      (cplx(0.0, -1.0) * (Mat::load(psi.at(0, x), n) * s.phi_at(x))).store(v.dphi.at(0, x));
    }
  });
  return v;
}

FieldState step(const FieldState& s, double tau, double dt, Method method) {
  if (!(dt > 0.0)) throw InvalidArgument("step: dt must be positive");
  FieldState out;
  if (method == Method::euler) {
    out = displace(s, ymh_gradient(s, tau), dt);
  } else {
    const Tangent k1 = ymh_gradient(s, tau);
    const Tangent k2 = ymh_gradient(displace(s, k1, 0.5 * dt), tau);
    const Tangent k3 = ymh_gradient(displace(s, k2, 0.5 * dt), tau);
    const Tangent k4 = ymh_gradient(displace(s, k3, dt), tau);
    out = s;
    const double w[4] = {dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0};
    const Tangent* k[4] = {&k1, &k2, &k3, &k4};
    for (int i = 0; i < 4; ++i) {
      out.A().axpy(w[i], k[i]->dA);
      out.phi().axpy(w[i], k[i]->dphi);
    }
  }
  if (!out.A().all_finite()) throw InstabilityError("A", "step produced non-finite connection values");
  if (!out.phi().all_finite()) throw InstabilityError("phi", "step produced non-finite section values");
  return out;
}

double resolve_initial_step(const FlowSchedule& schedule, const LatticeGeometry& geom) {
  const double h2 = geom.spacing() * geom.spacing();
  if (!(schedule.cfl_factor > 0.0)) throw InvalidArgument("flow: cfl_factor must be positive");
  if (!(schedule.t_end >= 0.0) || !std::isfinite(schedule.t_end)) throw InvalidArgument("flow: t_end must be >= 0");
  if (schedule.record_every < 1) throw InvalidArgument("flow: record_every must be >= 1");
  const double limit = schedule.cfl_factor * h2;
  if (schedule.dt_init == 0.0) return limit;
  if (!(schedule.dt_init > 0.0)) throw InvalidArgument("flow: dt_init must be positive");
  if (schedule.dt_init > limit * (1.0 + 1e-12))
    throw InvalidArgument("flow: dt_init exceeds the stability bound cfl_factor * h^2 = " + std::to_string(limit));
  return schedule.dt_init;
}

namespace {

// Shared step-control loop. `Model` provides: state type, advance(state, dt) -> state,
// functional(state) -> double, finite(state) -> bool, record(state, t, dt) -> TraceRow.
template <class State, class Advance, class Functional, class Record>
struct Controller {
  const FlowSchedule& schedule;
  double h2;
  Advance advance;
  Functional functional;
  Record record;

  struct Outcome {
    State state;
    DiagnosticsTrace trace;
    std::vector<double> energies;
    double t = 0.0;
    long steps = 0;
    long rejected = 0;
    bool converged = false;
  };

  template <class OnDivergence>
  Outcome run(const State& start, double dt, OnDivergence&& diverge) {
    Outcome o;
    o.state = start;
    double E = functional(o.state);
    o.energies.push_back(E);
    o.trace.push_back(record(o.state, 0.0, 0.0));
    const double t_end = schedule.t_end;
    long since_record = 0;
    auto stop_for_tol = [&](const TraceRow& row) {
      return schedule.vortex_tol > 0.0 && row.moment_inf_norm <= schedule.vortex_tol;
    };
    if (stop_for_tol(o.trace.back())) {
      o.converged = true;
      return o;
    }
    while (o.t < t_end * (1.0 - 1e-14)) {
      if (schedule.max_steps > 0 && o.steps >= schedule.max_steps) break;
      const double h = std::min(dt, t_end - o.t);
      bool ok = true;
      State trial;
      double E_new = 0.0;
      try {
        trial = advance(o.state, h);
        E_new = functional(trial);
        if (!std::isfinite(E_new)) throw InstabilityError("ymh", "energy became non-finite");
      } catch (const InstabilityError&) {
        if (!schedule.adapt) throw;
        ok = false;
      }
      if (ok && schedule.adapt && E_new > E + energy_tolerance(E)) ok = false;
      if (!ok) {
        ++o.rejected;
        dt *= 0.5;
        if (dt < 1e-10 * h2) diverge(o);
        continue;
      }
      o.state = std::move(trial);
      o.t += h;
      ++o.steps;
      E = E_new;
      o.energies.push_back(E);
      const bool last = !(o.t < t_end * (1.0 - 1e-14)) ||
                        (schedule.max_steps > 0 && o.steps >= schedule.max_steps);
      if (++since_record >= schedule.record_every || last) {
        since_record = 0;
        o.trace.push_back(record(o.state, o.t, h));
        if (stop_for_tol(o.trace.back())) {
          o.converged = true;
          break;
        }
      }
    }
    return o;
  }
};

template <class State, class A, class F, class R>
Controller<State, A, F, R> make_controller(const FlowSchedule& sc, double h2, A a, F f, R r) {
  return Controller<State, A, F, R>{sc, h2, std::move(a), std::move(f), std::move(r)};
}

}  // namespace

FlowResult integrate(const FieldState& s, double tau, const FlowSchedule& schedule, Method method,
                     const RecordObserver& observer) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  const auto& geom = s.geometry();
  const double dt = resolve_initial_step(schedule, geom);
  auto ctl = make_controller<FieldState>(
      schedule, geom.spacing() * geom.spacing(),
      [&](const FieldState& st, double h) { return step(st, tau, h, method); },
      [&](const FieldState& st) { return ymh(st, tau).ymh_total; },
      [&](const FieldState& st, double t, double h) {
        TraceRow row = measure(st, tau, t, h);
        if (observer) observer(row, st);
        return row;
      });
  auto out = ctl.run(s, dt, [](auto& o) {
    throw DivergenceError("dt", "adaptive step fell below 1e-10 h^2 at t = " + std::to_string(o.t), o.state, o.t,
                          o.trace);
  });
  FlowResult r;
  r.final_state = std::move(out.state);
  r.trace = std::move(out.trace);
  r.step_energies = std::move(out.energies);
  r.t_final = out.t;
  r.steps = out.steps;
  r.rejected = out.rejected;
  r.converged = out.converged;
  return r;
}

// ---------------------------------------------------------------------------
// Metric flow

MetricState::MetricState(FieldState b) : base(std::move(b)) {
  const auto& g = base.geometry();
  if (base.rank() != 1 || g.complex_dim() != 1)
    throw InvalidArgument("metric flow: rank 1 and complex dimension 1 only");
  u = FormField(g, 0, ValueShape::scalar());
}

namespace {

void require_metric(const MetricState& ms) {
  if (ms.base.rank() != 1 || ms.base.geometry().complex_dim() != 1)
    throw InvalidArgument("metric flow: rank 1 and complex dimension 1 only");
  if (!ms.u.same_layout(FormField(ms.base.geometry(), 0, ValueShape::scalar())))
    throw InvalidArgument("metric flow: u does not match the base geometry");
}

// c = Re(-i Lambda F_0) + tau / 2
std::vector<double> source_term(const FieldState& base, double tau) {
  const auto& g = base.geometry();
  std::vector<double> c(g.site_count());
  for (std::size_t x = 0; x < g.site_count(); ++x)
    c[x] = (cplx(0.0, -1.0) * curvature_at(base, 0, 1, x).e[0]).real() + 0.5 * tau;
  return c;
}

FormField laplacian(const FormField& u) { return cplx(-1.0) * codifferential(exterior_derivative(u)); }

}  // namespace

FormField metric_flow_rhs(const MetricState& ms, double tau) {
  require_metric(ms);
  const auto& g = ms.base.geometry();
  const auto c = source_term(ms.base, tau);
  FormField out = laplacian(ms.u);
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    const double u = ms.u.at(0, x)->real();
    const double w = std::norm(*ms.base.phi().at(0, x)) * std::exp(2.0 * u);
    *out.at(0, x) = out.at(0, x)->real() + c[x] - 0.5 * w;
  }
  return out;
}

FieldState reconstruct_pair(const MetricState& ms) {
  require_metric(ms);
  const auto& g = ms.base.geometry();
  FieldState out = ms.base;
  const FormField du = exterior_derivative(ms.u);
  const auto& P10 = type_projector(2, 1, 0);
  const auto& P01 = type_projector(2, 0, 1);
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    for (int mu = 0; mu < 2; ++mu) {
      cplx a = 0.0;
      for (int nu = 0; nu < 2; ++nu) a += (P10[mu * 2 + nu] - P01[mu * 2 + nu]) * *du.at(nu, x);
      *out.A().at(mu, x) += a;
    }
    *out.phi().at(0, x) *= std::exp(ms.u.at(0, x)->real());
  }
  return out;
}

MetricObservables metric_observables(const MetricState& ms, double tau) {
  require_metric(ms);
  const auto& g = ms.base.geometry();
  MetricObservables o;
  o.phi_sq = FormField(g, 0, ValueShape::scalar());
  o.i_lambdaF = laplacian(ms.u);
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    const double u = ms.u.at(0, x)->real();
    *o.phi_sq.at(0, x) = std::norm(*ms.base.phi().at(0, x)) * std::exp(2.0 * u);
    const double iLF0 = (kI * curvature_at(ms.base, 0, 1, x).e[0]).real();
    *o.i_lambdaF.at(0, x) = iLF0 - o.i_lambdaF.at(0, x)->real();
  }
  o.ymh = ymh(reconstruct_pair(ms), tau).ymh_total;
  return o;
}

double donaldson_functional(const MetricState& ms, double tau) {
  require_metric(ms);
  const auto& g = ms.base.geometry();
  const auto c = source_term(ms.base, tau);
  const FormField du = exterior_derivative(ms.u);
  double pot = 0.0;
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    const double u = ms.u.at(0, x)->real();
    pot += 0.25 * std::norm(*ms.base.phi().at(0, x)) * std::exp(2.0 * u) - c[x] * u;
  }
  return 0.5 * inner(du, du) + pot * g.cell_volume();
}

namespace {

MetricState metric_step(const MetricState& ms, double tau, double dt, Method method) {
  MetricState out = ms;
  if (method == Method::euler) {
    out.u.axpy(dt, metric_flow_rhs(ms, tau));
  } else {
    MetricState tmp = ms;
    const FormField k1 = metric_flow_rhs(ms, tau);
    tmp.u = ms.u;
    tmp.u.axpy(0.5 * dt, k1);
    const FormField k2 = metric_flow_rhs(tmp, tau);
    tmp.u = ms.u;
    tmp.u.axpy(0.5 * dt, k2);
    const FormField k3 = metric_flow_rhs(tmp, tau);
    tmp.u = ms.u;
    tmp.u.axpy(dt, k3);
    const FormField k4 = metric_flow_rhs(tmp, tau);
    out.u.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4);
  }
  if (!out.u.all_finite()) throw InstabilityError("u", "metric step produced non-finite values");
  return out;
}

}  // namespace

MetricFlowResult integrate_metric_flow(const MetricState& ms, double tau, const FlowSchedule& schedule,
                                       Method method) {
  require_metric(ms);
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  const auto& geom = ms.base.geometry();
  const double dt = resolve_initial_step(schedule, geom);
  auto ctl = make_controller<MetricState>(
      schedule, geom.spacing() * geom.spacing(),
      [&](const MetricState& st, double h) { return metric_step(st, tau, h, method); },
      [&](const MetricState& st) { return donaldson_functional(st, tau); },
      [&](const MetricState& st, double t, double h) { return measure(reconstruct_pair(st), tau, t, h); });
  auto out = ctl.run(ms, dt, [](auto& o) {
    throw InstabilityError("dt", "metric flow: adaptive step fell below 1e-10 h^2 at t = " + std::to_string(o.t));
  });
  MetricFlowResult r;
  r.final_state = std::move(out.state);
  r.trace = std::move(out.trace);
  r.t_final = out.t;
  r.steps = out.steps;
  r.rejected = out.rejected;
  r.converged = out.converged;
  return r;
}

}  // namespace kvf
