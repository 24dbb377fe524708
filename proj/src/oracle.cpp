#include "kvf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "kvf/energy.hpp"
#include "kvf/error.hpp"
#include "kvf/parallel.hpp"

namespace kvf {

namespace {

const cplx kI(0.0, 1.0);

Mat connection_basis(int n, int b) {
  Mat B = Mat::zero(n);
  if (b < n) {
    B(b, b) = kI;
    return B;
  }
  int idx = n;
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k) {
      if (b == idx) {
        B(j, k) = 1.0;
        B(k, j) = -1.0;
        return B;
      }
      if (b == idx + 1) {
        B(j, k) = kI;
        B(k, j) = kI;
        return B;
      }
      idx += 2;
    }
  throw InvalidArgument("connection basis index out of range");
}

// Pointwise real pairing of the velocity with the coordinate's basis element.
double pointwise_component(const Tangent& v, const Coordinate& c, int n) {
  if (c.field == Coordinate::Field::connection)
    return hs_inner(Mat::load(v.dA.at(c.comp, c.site), n), connection_basis(n, c.basis));
  const cplx val = v.dphi.at(0, c.site)[c.basis / 2];
  return c.basis % 2 == 0 ? val.real() : val.imag();
}

// ---- linear algebra on real scalar 0-forms (stored as complex with zero imaginary part)

std::vector<double> to_real(const FormField& f) {
  std::vector<double> r(f.sites());
  for (std::size_t x = 0; x < r.size(); ++x) r[x] = f.at(0, x)->real();
  return r;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sup_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// y = (d^* d + diag(w)) v, the negative linearisation of the stationary residual.
struct NegJacobian {
  const LatticeGeometry& geom;
  std::vector<double> w;
  std::vector<double> apply(const std::vector<double>& v) const {
    FormField f(geom, 0, ValueShape::scalar());
    for (std::size_t x = 0; x < v.size(); ++x) *f.at(0, x) = v[x];
    const FormField L = codifferential(exterior_derivative(f));
    std::vector<double> y(v.size());
    for (std::size_t x = 0; x < v.size(); ++x) y[x] = L.at(0, x)->real() + w[x] * v[x];
    return y;
  }
};

std::vector<double> conjugate_gradient(const NegJacobian& op, const std::vector<double>& b, double rel_tol,
                                       int max_iter) {
  std::vector<double> x(b.size(), 0.0), r = b, p = b;
  double rr = dot(r, r);
  const double stop = rel_tol * rel_tol * rr;
  for (int it = 0; it < max_iter && rr > stop && rr > 0.0; ++it) {
    const auto Ap = op.apply(p);
    const double alpha = rr / dot(p, Ap);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }
  return x;
}

std::vector<double> weights(const MetricState& ms) {
  std::vector<double> w(ms.u.sites());
  for (std::size_t x = 0; x < w.size(); ++x)
    w[x] = std::norm(*ms.base.phi().at(0, x)) * std::exp(2.0 * ms.u.at(0, x)->real());
  return w;
}

double base_threshold(const FieldState& base) {
  // tau_c = (2 / vol) * sum_x Re(i Lambda F_0) h^2
  const auto& g = base.geometry();
  double s = 0.0;
  for (std::size_t x = 0; x < g.site_count(); ++x) s += (kI * curvature_at(base, 0, 1, x).e[0]).real();
  return 2.0 * s * g.cell_volume() / g.volume();
}

// E(a) - E(b) accumulated site by site, so that rounding scales with the local
// energy density rather than with the total energy.
double energy_difference(const FieldState& a, const FieldState& b, double tau) {
  const SiteKernel ka(a, tau), kb(b, tau);
  auto sum = parallel_sum(a.geometry().site_count(), 1, [&](std::size_t x, double* acc) {
    const SiteTerms ta = ka(x), tb = kb(x);
    acc[0] += (ta.F_sq - tb.F_sq) + (ta.dphi_sq - tb.dphi_sq) + (ta.quartic - tb.quartic);
  });
  return sum[0] * a.geometry().cell_volume();
}

}  // namespace

void perturb(FieldState& s, const Coordinate& c, double amount) {
  const int n = s.rank();
  if (c.field == Coordinate::Field::connection) {
    Mat a = s.A_at(c.comp, c.site) + amount * connection_basis(n, c.basis);
    a.store(s.A().at(c.comp, c.site));
  } else {
    s.phi().at(0, c.site)[c.basis / 2] += c.basis % 2 == 0 ? cplx(amount) : cplx(0.0, amount);
  }
}

std::vector<Coordinate> random_coordinates(const FieldState& s, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = s.rank();
  const auto& g = s.geometry();
  std::vector<Coordinate> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Coordinate c;
    c.site = std::uniform_int_distribution<std::size_t>(0, g.site_count() - 1)(rng);
    if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
      c.field = Coordinate::Field::connection;
      c.comp = std::uniform_int_distribution<int>(0, g.real_dim() - 1)(rng);
      c.basis = std::uniform_int_distribution<int>(0, n * n - 1)(rng);
    } else {
      c.field = Coordinate::Field::section;
      c.basis = std::uniform_int_distribution<int>(0, 2 * n - 1)(rng);
    }
    out.push_back(c);
  }
  return out;
}

FdGradientReport fd_gradient(const FieldState& s, double tau, double eps, const std::vector<Coordinate>& sample) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw InvalidArgument("fd_gradient: eps must lie in [1e-7, 1e-3]");
  if (sample.empty()) throw InvalidArgument("fd_gradient: empty coordinate sample");
  const Tangent v = ymh_gradient(s, tau);
  const double w = s.geometry().cell_volume();
  FdGradientReport r;
  r.sample = sample;
  double max_an = 0.0;
  for (const auto& c : sample) {
    FieldState plus = s, minus = s;
    perturb(plus, c, eps);
    perturb(minus, c, -eps);
    r.fd.push_back(energy_difference(plus, minus, tau) / (2.0 * eps));
    r.analytic.push_back(-2.0 * w * pointwise_component(v, c, s.rank()));
    max_an = std::max(max_an, std::abs(r.analytic.back()));
    r.max_abs_deviation = std::max(r.max_abs_deviation, std::abs(r.fd.back() - r.analytic.back()));
  }
  r.max_relative_deviation = max_an > 0.0 ? r.max_abs_deviation / max_an : r.max_abs_deviation;
  return r;
}

KwResult kw_solve(const FieldState& base, double tau, const KwOptions& opts) {
  if (!(tau > 0.0)) throw InvalidArgument("kw_solve: tau must be positive");
  if (!(opts.tol > 0.0) || opts.max_iter < 1) throw InvalidArgument("kw_solve: invalid tolerance or iteration cap");
  KwResult res;
  res.state = MetricState(base);
  if (base.phi().max_abs() == 0.0) throw InvalidArgument("kw_solve: the base section vanishes identically");
  res.threshold = base_threshold(base);
  if (!(tau > res.threshold)) {
    std::ostringstream os;
    os << "kw_solve: tau = " << tau << " does not exceed the threshold " << res.threshold
       << "; the integral of the stationary equation cannot vanish";
    throw InfeasibleError(res.threshold, os.str());
  }
  if (opts.initial) res.state.u = *opts.initial;
  const auto& g = base.geometry();
  auto rhs = to_real(metric_flow_rhs(res.state, tau));
  double r = sup_abs(rhs);
  res.residual_history.push_back(r);
  while (r > opts.tol) {
    if (res.iterations >= opts.max_iter) {
      std::ostringstream os;
      os << "kw_solve: no convergence in " << opts.max_iter << " iterations; residual history:";
      for (double h : res.residual_history) os << ' ' << h;
      throw NonConvergence(os.str());
    }
    ++res.iterations;
    const NegJacobian J{g, weights(res.state)};
    const auto delta = conjugate_gradient(J, rhs, 1e-13, 20 * static_cast<int>(g.site_count()));
    double lambda = 1.0;
    MetricState trial = res.state;
    std::vector<double> trial_rhs;
    double trial_r = 0.0;
    for (int halving = 0; halving <= 40; ++halving) {
      trial = res.state;
      for (std::size_t x = 0; x < delta.size(); ++x) *trial.u.at(0, x) += lambda * delta[x];
      trial_rhs = to_real(metric_flow_rhs(trial, tau));
      trial_r = sup_abs(trial_rhs);
      if (std::isfinite(trial_r) && trial_r <= r) break;
      lambda *= 0.5;
    }
    if (!(trial_r <= r)) {
      // no decrease along the Newton direction: keep the best attempt and let the cap decide
      if (!std::isfinite(trial_r)) continue;
    }
    res.state = std::move(trial);
    rhs = std::move(trial_rhs);
    r = trial_r;
    res.residual_history.push_back(r);
  }
  res.residual = r;
  res.moment_residual = measure(reconstruct_pair(res.state), tau).moment_inf_norm;
  return res;
}

KwResult kw_solve_continuation(const FieldState& base, double tau, const KwOptions& opts, int stages) {
  const double tc = base_threshold(base);
  if (!(tau > tc)) return kw_solve(base, tau, opts);  // raises the infeasibility error
  const double target_margin = tau - tc;
  const double start_margin = std::max(target_margin, std::max(tc, 1.0));
  FormField u(base.geometry(), 0, ValueShape::scalar());
  if (opts.initial) u = *opts.initial;
  KwResult last;
  for (int k = 0; k <= stages; ++k) {
    const double margin = start_margin * std::pow(target_margin / start_margin, static_cast<double>(k) / stages);
    KwOptions o = opts;
    o.initial = &u;
    const double t_k = k == stages ? tau : tc + margin;
    last = kw_solve(base, t_k, o);
    u = last.state.u;
  }
  return last;
}

double linearization_max_eigenvalue(const MetricState& ms, double tau, int max_iter, double tol) {
  (void)tau;
  const auto& g = ms.base.geometry();
  const NegJacobian J{g, weights(ms)};
  // Block inverse iteration with Rayleigh-Ritz. The collocated Laplacian has near-null
  // odd-even modes, so the bottom of the spectrum of -J is clustered; a block separates
  // the cluster where single-vector iteration would stall.
  const auto n = static_cast<Eigen::Index>(g.site_count());
  const Eigen::Index b = std::min<Eigen::Index>(8, n);
  auto apply = [&](const Eigen::VectorXd& v) {
    const std::vector<double> in(v.data(), v.data() + v.size());
    const auto out = J.apply(in);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(out.data(), n));
  };
  auto solve = [&](const Eigen::VectorXd& v) {
    const std::vector<double> in(v.data(), v.data() + v.size());
    const auto out = conjugate_gradient(J, in, 1e-14, 20 * static_cast<int>(n));
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(out.data(), n));
  };
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd V(n, b);
  for (Eigen::Index j = 0; j < b; ++j)
    for (Eigen::Index i = 0; i < n; ++i) V(i, j) = normal(rng);
  double mu = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd Y(n, b);
    for (Eigen::Index j = 0; j < b; ++j) Y.col(j) = solve(V.col(j));
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Y).householderQ() * Eigen::MatrixXd::Identity(n, b);
    Eigen::MatrixXd AQ(n, b);
    for (Eigen::Index j = 0; j < b; ++j) AQ.col(j) = apply(Q.col(j));
    const Eigen::MatrixXd H = 0.5 * (Q.transpose() * AQ + (Q.transpose() * AQ).transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    V = Q * eig.eigenvectors();
    mu = eig.eigenvalues()(0);  // ascending order
    const Eigen::VectorXd r = AQ * eig.eigenvectors().col(0) - mu * V.col(0);
    if (r.norm() <= tol * std::abs(mu)) break;
  }
  return -mu;
}

double linearization_max_eigenvalue_power(const MetricState& ms, double tau, int max_iter, double tol) {
  (void)tau;
  const auto& g = ms.base.geometry();
  const NegJacobian J{g, weights(ms)};
  // Gershgorin-type bound on the spectrum of -J.
  double radius = 0.0;
  for (double s : g.stencil_weights()) radius += std::abs(s);
  const double sigma = 4.0 * g.real_dim() * radius * radius / (g.spacing() * g.spacing()) + sup_abs(J.w);
  std::vector<double> v(g.site_count());
  std::mt19937_64 rng(54321);
  std::normal_distribution<double> normal;
  for (auto& x : v) x = normal(rng);
  double lam = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double nv = std::sqrt(dot(v, v));
    for (auto& x : v) x /= nv;
    auto y = J.apply(v);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = sigma * v[i] - y[i];  // (sigma I + J) v
    lam = dot(v, y);
    double res2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) res2 += (y[i] - lam * v[i]) * (y[i] - lam * v[i]);
    v.swap(y);
    if (std::sqrt(res2) <= tol * sigma) break;
  }
  return lam - sigma;
}

double plateau_energy(const BundleSpec& spec, const LatticeGeometry& geom, double tau) {
  if (spec.rank != 1 || geom.complex_dim() != 1)
    throw InvalidArgument("plateau_energy: rank 1, complex dimension 1 only");
  const double L = geom.length();
  const double pi = std::numbers::pi;
  return 4.0 * pi * pi * spec.degree * spec.degree / (L * L) + tau * tau * L * L / 4.0;
}

double constant_data_phi_sq(double phi0_sq, double tau, double t) {
  const double e = std::exp(tau * t);
  return tau * phi0_sq * e / (tau + phi0_sq * (e - 1.0));
}

}  // namespace kvf
