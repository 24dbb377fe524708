#include "kvf/bundle.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "kvf/error.hpp"
#include "kvf/parallel.hpp"

namespace kvf {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);

// Applies a D x D pointwise form matrix (row-major) to per-axis matrices.
void apply_form_matrix(const std::vector<cplx>& P, int D, const Mat* in, Mat* out) {
  for (int mu = 0; mu < D; ++mu) {
    out[mu] = Mat::zero(in[0].n);
    for (int nu = 0; nu < D; ++nu) {
      const cplx c = P[static_cast<std::size_t>(mu) * D + nu];
      if (c != cplx(0.0)) out[mu] += c * in[nu];
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Bundle and state

void validate_bundle(const BundleSpec& spec, const LatticeGeometry& geom) {
  if (spec.rank != 1 && spec.rank != 2) throw InvalidArgument("bundle rank must be 1 or 2");
  if (spec.degree != 0 && (geom.complex_dim() != 1 || spec.rank != 1))
    throw UnsupportedTopology("nonzero degree is supported only for rank 1 on a complex curve (m = 1)");
}

FieldState::FieldState(const BundleSpec& spec, const LatticeGeometry& geom)
    : spec_(spec),
      A_(geom, 1, ValueShape::matrix(spec.rank)),
      phi_(geom, 0, ValueShape::vector(spec.rank)) {
  validate_bundle(spec, geom);
  bg_slope_ = -2.0 * kPi * spec.degree / (geom.length() * geom.length());
}

Mat FieldState::connection_at(int axis, std::size_t site) const {
  Mat a = A_at(axis, site);
  if (axis == 1 && spec_.degree != 0) a(0, 0) += kI * (bg_slope_ * geometry().position(site, 0));
  return a;
}

cplx FieldState::background_curvature(int mu, int nu) const {
  if (spec_.degree == 0) return 0.0;
  if (mu == 0 && nu == 1) return kI * bg_slope_;
  if (mu == 1 && nu == 0) return -kI * bg_slope_;
  return 0.0;
}

cplx FieldState::twist(std::size_t site, int axis, int crossing) const {
  if (spec_.degree == 0 || axis != 0 || crossing == 0) return 1.0;
  const auto& g = geometry();
  const double phase = 2.0 * kPi * spec_.degree * g.position(site, 1) / g.length();
  return std::polar(1.0, crossing > 0 ? phase : -phase);
}

bool FieldState::same_layout(const FieldState& o) const {
  return spec_.rank == o.spec_.rank && spec_.degree == o.spec_.degree && A_.same_layout(o.A_) &&
         phi_.same_layout(o.phi_);
}

FieldState background_state(const BundleSpec& spec, const LatticeGeometry& geom) { return FieldState(spec, geom); }

// ---------------------------------------------------------------------------
// Site kernels

Vec section_read(const FieldState& s, const FormField& f, int comp, std::size_t site, int axis, int k) {
  int crossing = 0;
  const std::size_t nb = s.geometry().shift(site, axis, k, &crossing);
  Vec v = Vec::load(f.at(comp, nb), s.rank());
  if (crossing != 0) v *= s.twist(site, axis, crossing);
  return v;
}

Vec section_covariant_difference(const FieldState& s, const FormField& f, int comp, int axis,
                                 std::size_t site) {
  const auto& g = s.geometry();
  const auto w = g.stencil_weights();
  const double inv_h = 1.0 / g.spacing();
  Vec out = Vec::zero(s.rank());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const int step = static_cast<int>(k) + 1;
    Vec diff = section_read(s, f, comp, site, axis, step) - section_read(s, f, comp, site, axis, -step);
    out += (w[k] * inv_h) * diff;
  }
  out += s.connection_at(axis, site) * Vec::load(f.at(comp, site), s.rank());
  return out;
}

Mat end_covariant_difference(const FieldState& s, const FormField& X, int comp, int axis, std::size_t site) {
  Mat out = Mat::zero(s.rank());
  axis_difference(X, comp, axis, site, out.e.data());
  if (s.rank() > 1) out += commutator(s.A_at(axis, site), Mat::load(X.at(comp, site), s.rank()));
  return out;
}

Vec covariant_derivative_at(const FieldState& s, int axis, std::size_t site) {
  return section_covariant_difference(s, s.phi(), 0, axis, site);
}

Mat curvature_at(const FieldState& s, int mu, int nu, std::size_t site) {
  if (mu == nu) return Mat::zero(s.rank());
  if (mu > nu) return cplx(-1.0) * curvature_at(s, nu, mu, site);
  const int n = s.rank();
  Mat a = Mat::zero(n), b = Mat::zero(n);
  axis_difference(s.A(), nu, mu, site, a.e.data());
  axis_difference(s.A(), mu, nu, site, b.e.data());
  Mat F = a - b;
  if (n > 1) F += commutator(s.A_at(mu, site), s.A_at(nu, site));
  const cplx bg = s.background_curvature(mu, nu);
  if (bg != cplx(0.0)) F += Mat::scalar(n, bg);
  return F;
}

// ---------------------------------------------------------------------------
// Whole-field operators

FormField covariant_d(const FieldState& s) {
  const auto& g = s.geometry();
  FormField out(g, 1, ValueShape::vector(s.rank()));
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    for (int mu = 0; mu < g.real_dim(); ++mu)
      for (std::size_t x = begin; x < end; ++x) covariant_derivative_at(s, mu, x).store(out.at(mu, x));
  });
  return out;
}

CovariantSplit covariant_split(const FieldState& s) {
  FormField d = covariant_d(s);
  return {type_project(d, 1, 0), type_project(d, 0, 1)};
}

FormField curvature(const FieldState& s) {
  const auto& g = s.geometry();
  FormField out(g, 2, ValueShape::matrix(s.rank()));
  const auto& basis = FormBasis::get(g.real_dim(), 2);
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    for (int c = 0; c < basis.size(); ++c) {
      const unsigned M = basis.mask(c);
      const int mu = std::countr_zero(M);
      const int nu = 31 - std::countl_zero(M);
      for (std::size_t x = begin; x < end; ++x) curvature_at(s, mu, nu, x).store(out.at(c, x));
    }
  });
  return out;
}

FormField section_codifferential(const FieldState& s, const FormField& psi) {
  if (psi.degree() != 1) throw InvalidArgument("section_codifferential: expects a 1-form");
  const auto& g = s.geometry();
  FormField out(g, 0, ValueShape::vector(s.rank()));
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) {
      Vec acc = Vec::zero(s.rank());
      for (int mu = 0; mu < g.real_dim(); ++mu) acc -= section_covariant_difference(s, psi, mu, mu, x);
      acc.store(out.at(0, x));
    }
  });
  return out;
}

FormField end_covariant_d(const FieldState& s, const FormField& X) {
  if (X.degree() != 0) throw InvalidArgument("end_covariant_d: expects a 0-form");
  const auto& g = s.geometry();
  FormField out(g, 1, ValueShape::matrix(s.rank()));
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    for (int mu = 0; mu < g.real_dim(); ++mu)
      for (std::size_t x = begin; x < end; ++x) end_covariant_difference(s, X, 0, mu, x).store(out.at(mu, x));
  });
  return out;
}

FormField end_codifferential(const FieldState& s, const FormField& G) {
  if (G.degree() != 2) throw InvalidArgument("end_codifferential: expects a 2-form");
  const auto& g = s.geometry();
  const int D = g.real_dim();
  const auto& basis = FormBasis::get(D, 2);
  FormField out(g, 1, ValueShape::matrix(s.rank()));
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    for (int nu = 0; nu < D; ++nu)
      for (std::size_t x = begin; x < end; ++x) {
        Mat acc = Mat::zero(s.rank());
        for (int mu = 0; mu < D; ++mu) {
          if (mu == nu) continue;
          const int c = basis.index((1u << mu) | (1u << nu));
          const double sign = mu < nu ? 1.0 : -1.0;  // G_{mu nu} = sign * G[c]
          acc -= sign * end_covariant_difference(s, G, c, mu, x);
        }
        acc.store(out.at(nu, x));
      }
  });
  return out;
}

double discrete_flux(const FieldState& s) {
  const auto& g = s.geometry();
  if (g.complex_dim() != 1) throw InvalidArgument("discrete_flux: complex dimension 1 only");
  auto sum = parallel_sum(g.site_count(), 1, [&](std::size_t x, double* acc) {
    acc[0] += (kI * curvature_at(s, 0, 1, x).trace()).real();
  });
  return sum[0] * g.cell_volume() / (2.0 * kPi);
}

// ---------------------------------------------------------------------------
// Gauge action

GaugeTransform GaugeTransform::identity(const LatticeGeometry& geom, int rank) {
  GaugeTransform t{FormField(geom, 0, ValueShape::matrix(rank)), true};
  for (std::size_t x = 0; x < geom.site_count(); ++x) Mat::identity(rank).store(t.g.at(0, x));
  return t;
}

GaugeTransform GaugeTransform::exponential(const FormField& X) {
  if (X.degree() != 0 || X.shape().rows != X.shape().cols)
    throw InvalidArgument("GaugeTransform::exponential: expects a matrix-valued 0-form");
  const int n = X.shape().rows;
  GaugeTransform t{FormField(X.geometry(), 0, X.shape()), false};
  bool anti_hermitian = true;
  for (std::size_t x = 0; x < X.sites(); ++x) {
    const Mat m = Mat::load(X.at(0, x), n);
    if ((m + m.adjoint()).norm2() > 1e-26 * (1.0 + m.norm2())) anti_hermitian = false;
    Mat e = Mat::zero(n);
    if (n == 1) {
      e.e[0] = std::exp(m.e[0]);
    } else {
      const cplx a = 0.5 * m.trace();
      const Mat B = m - Mat::scalar(n, a);
      const cplx s = std::sqrt(-B.det());
      const cplx sinhc = std::abs(s) < 1e-6 ? 1.0 + s * s / 6.0 : std::sinh(s) / s;
      e = std::exp(a) * (Mat::scalar(n, std::cosh(s)) + sinhc * B);
    }
    e.store(t.g.at(0, x));
  }
  t.unitary = anti_hermitian;
  return t;
}

double GaugeTransform::unitarity_defect() const {
  const int n = g.shape().rows;
  double worst = 0.0;
  for (std::size_t x = 0; x < g.sites(); ++x) {
    const Mat m = Mat::load(g.at(0, x), n);
    worst = std::max(worst, std::sqrt((m.adjoint() * m - Mat::identity(n)).norm2()));
  }
  return worst;
}

GaugeTransform compose(const GaugeTransform& g1, const GaugeTransform& g2) {
  if (!g1.g.same_layout(g2.g)) throw InvalidArgument("compose: layouts differ");
  const int n = g1.g.shape().rows;
  GaugeTransform t{FormField(g1.g.geometry(), 0, g1.g.shape()), g1.unitary && g2.unitary};
  for (std::size_t x = 0; x < t.g.sites(); ++x)
    (Mat::load(g1.g.at(0, x), n) * Mat::load(g2.g.at(0, x), n)).store(t.g.at(0, x));
  return t;
}

FieldState gauge_transform(const FieldState& s, const GaugeTransform& gt) {
  const auto& geom = s.geometry();
  const int n = s.rank();
  if (!(gt.g.geometry() == geom) || gt.g.degree() != 0 || !(gt.g.shape() == ValueShape::matrix(n)))
    throw InvalidArgument("gauge_transform: gauge field does not match the state");
  const int D = geom.real_dim();
  const auto& P01 = type_projector(D, 0, 1);
  const auto& P10 = type_projector(D, 1, 0);
  FieldState out(s.spec(), geom);
  std::atomic<bool> singular{false};
  parallel_blocks(geom.site_count(), [&](std::size_t begin, std::size_t end) {
    std::array<Mat, 4> A{}, dg{}, dgs{}, A01{}, A10{}, dg01{}, dgs10{};
    for (std::size_t x = begin; x < end; ++x) {
      const Mat g = Mat::load(gt.g.at(0, x), n);
      const cplx det = g.det();
      if (!(std::abs(det) > 1e-300) || !std::isfinite(std::abs(det))) {
        singular = true;
        continue;
      }
      const Mat ginv = g.inverse();
      const Mat gs = g.adjoint();
      const Mat gsinv = gs.inverse();
      for (int mu = 0; mu < D; ++mu) {
        A[mu] = s.A_at(mu, x);
        dg[mu] = Mat::zero(n);
        axis_difference(gt.g, 0, mu, x, dg[mu].e.data());
        dgs[mu] = dg[mu].adjoint();
      }
      apply_form_matrix(P01, D, A.data(), A01.data());
      apply_form_matrix(P10, D, A.data(), A10.data());
      apply_form_matrix(P01, D, dg.data(), dg01.data());
      apply_form_matrix(P10, D, dgs.data(), dgs10.data());
      for (int mu = 0; mu < D; ++mu) {
        Mat a = g * A01[mu] * ginv - dg01[mu] * ginv + gsinv * A10[mu] * gs + gsinv * dgs10[mu];
        a.store(out.A().at(mu, x));
      }
      (g * s.phi_at(x)).store(out.phi().at(0, x));
    }
  });
  if (singular) throw InvalidArgument("gauge_transform: gauge field is singular at some site");
  return out;
}

// ---------------------------------------------------------------------------
// Initial data

FormField theta_section(const BundleSpec& spec, const LatticeGeometry& geom, int truncation) {
  if (spec.rank != 1 || geom.complex_dim() != 1 || spec.degree < 1)
    throw InvalidArgument("theta_section: requires rank 1, complex dimension 1 and degree >= 1");
  if (truncation < 0) throw InvalidArgument("theta_section: truncation must be non-negative");
  const double d = spec.degree;
  const double tail = std::exp(-(kPi / d) * (truncation + 1.0) * (truncation + 1.0));
  if (tail > 1e-12)
    throw InvalidArgument("theta_section: truncation " + std::to_string(truncation) +
                          " leaves a series tail above 1e-12");
  const double L = geom.length();
  FormField phi(geom, 0, ValueShape::scalar());
  double sup = 0.0;
  for (std::size_t x = 0; x < geom.site_count(); ++x) {
    const double px = geom.position(x, 0);
    const double py = geom.position(x, 1);
    cplx sum = 0.0;
    for (int k = -truncation; k <= spec.degree + truncation; ++k) {
      const double r = k - d * px / L;
      sum += std::polar(std::exp(-(kPi / d) * r * r), 2.0 * kPi * k * py / L);
    }
    *phi.at(0, x) = sum;
    sup = std::max(sup, std::abs(sum));
  }
  phi *= 1.0 / sup;
  return phi;
}

WindingCount winding_count(const FieldState& s) {
  const auto& g = s.geometry();
  if (g.complex_dim() != 1 || s.rank() != 1) throw InvalidArgument("winding_count: rank 1, m = 1 only");
  const int N = g.sites_per_axis();
  const double L = g.length();
  const int d = s.spec().degree;
  auto value = [&](int i, int j) {
    const int jj = ((j % N) + N) % N;
    int ii = i;
    cplx phase = 1.0;
    if (ii >= N) {
      ii -= N;
      phase = std::polar(1.0, 2.0 * kPi * d * (jj + 0.5) * g.spacing() / L);
    }
    const int c[2] = {ii, jj};
    return phase * *s.phi().at(0, g.site_at(c));
  };
  WindingCount wc;
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      const cplx v[4] = {value(i, j), value(i + 1, j), value(i + 1, j + 1), value(i, j + 1)};
      double total = 0.0;
      for (int k = 0; k < 4; ++k) total += std::arg(v[(k + 1) % 4] / v[k]);
      const int w = static_cast<int>(std::lround(total / (2.0 * kPi)));
      wc.total += w;
      if (w != 0) ++wc.vortices;
    }
  return wc;
}

std::vector<cplx> evaluate_trigonometric(const LatticeGeometry& geom, int K, const std::vector<cplx>& coeffs) {
  const int D = geom.real_dim();
  const int N = geom.sites_per_axis();
  const int W = 2 * K + 1;
  std::size_t expected = 1;
  for (int a = 0; a < D; ++a) expected *= W;
  if (coeffs.size() != expected) throw InvalidArgument("evaluate_trigonometric: coefficient count mismatch");
  // E[k][i] = exp(2 pi i (k - K) x_i / L)
  std::vector<cplx> E(static_cast<std::size_t>(W) * N);
  for (int k = 0; k < W; ++k)
    for (int i = 0; i < N; ++i)
      E[static_cast<std::size_t>(k) * N + i] = std::polar(1.0, 2.0 * kPi * (k - K) * (i + 0.5) / N);
  std::vector<int> dims(D, W);
  std::vector<cplx> cur = coeffs;
  for (int a = 0; a < D; ++a) {
    std::size_t inner = 1, outer = 1;
    for (int b = 0; b < a; ++b) inner *= dims[b];
    for (int b = a + 1; b < D; ++b) outer *= dims[b];
    std::vector<cplx> next(inner * N * outer, cplx(0.0));
    for (std::size_t o = 0; o < outer; ++o)
      for (int k = 0; k < W; ++k) {
        const cplx* src = cur.data() + (o * W + k) * inner;
        for (int i = 0; i < N; ++i) {
          const cplx e = E[static_cast<std::size_t>(k) * N + i];
          cplx* dst = next.data() + (o * N + i) * inner;
          for (std::size_t q = 0; q < inner; ++q) dst[q] += e * src[q];
        }
      }
    dims[a] = N;
    cur.swap(next);
  }
  return cur;
}

namespace {

std::vector<cplx> random_coefficients(std::mt19937_64& rng, int D, int K, double amplitude) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int W = 2 * K + 1;
  std::size_t count = 1;
  for (int a = 0; a < D; ++a) count *= W;
  std::vector<cplx> c(count);
  // weights 1/(1+|k|^2), normalised so that the expected mean of |f|^2 equals amplitude^2
  double norm2 = 0.0;
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t rem = idx;
    double k2 = 0.0;
    for (int a = 0; a < D; ++a) {
      const int k = static_cast<int>(rem % W) - K;
      rem /= W;
      k2 += static_cast<double>(k) * k;
    }
    norm2 += 1.0 / ((1.0 + k2) * (1.0 + k2));
  }
  const double scale = amplitude / std::sqrt(norm2);
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t rem = idx;
    double k2 = 0.0;
    for (int a = 0; a < D; ++a) {
      const int k = static_cast<int>(rem % W) - K;
      rem /= W;
      k2 += static_cast<double>(k) * k;
    }
    const double re = normal(rng);
    const double im = normal(rng);
    c[idx] = scale * cplx(re, im) / (std::sqrt(2.0) * (1.0 + k2));
  }
  return c;
}

}  // namespace

FieldState random_state(const BundleSpec& spec, const LatticeGeometry& geom, std::uint64_t seed, int band_limit,
                        const RandomOptions& opts) {
  if (band_limit < 0 || band_limit > geom.sites_per_axis() / 4)
    throw InvalidArgument("random_state: band limit must lie in [0, N/4]");
  FieldState s(spec, geom);
  const int n = spec.rank;
  const int D = geom.real_dim();
  std::mt19937_64 rng(seed);
  for (int mu = 0; mu < D; ++mu)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        auto vals = evaluate_trigonometric(geom, band_limit, random_coefficients(rng, D, band_limit, 1.0));
        for (std::size_t x = 0; x < geom.site_count(); ++x) s.A().at(mu, x)[r * n + c] = vals[x];
      }
  // anti-Hermitian part, scaled
  for (int mu = 0; mu < D; ++mu)
    for (std::size_t x = 0; x < geom.site_count(); ++x) {
      Mat m = Mat::load(s.A().at(mu, x), n);
      (opts.connection_amplitude * anti_hermitian_part(m)).store(s.A().at(mu, x));
    }
  FormField theta;
  if (spec.degree != 0) theta = theta_section(spec, geom);
  for (int r = 0; r < n; ++r) {
    auto vals = evaluate_trigonometric(geom, band_limit, random_coefficients(rng, D, band_limit, opts.section_amplitude));
    for (std::size_t x = 0; x < geom.site_count(); ++x) {
      cplx v = vals[x] + opts.section_offset;
      if (spec.degree != 0) v *= *theta.at(0, x);
      s.phi().at(0, x)[r] = v;
    }
  }
  return s;
}

}  // namespace kvf
