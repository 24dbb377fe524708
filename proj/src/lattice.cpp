#include "kvf/lattice.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "kvf/error.hpp"
#include "kvf/parallel.hpp"

namespace kvf {

namespace {

constexpr std::array<double, 1> kSecondOrder = {0.5};
constexpr std::array<double, 2> kFourthOrder = {2.0 / 3.0, -1.0 / 12.0};

int popcount_below(unsigned mask, int axis) { return std::popcount(mask & ((1u << axis) - 1u)); }

void require_same_layout(const FormField& a, const FormField& b, const char* what) {
  if (!a.same_layout(b)) throw InvalidArgument(std::string(what) + ": field layouts differ");
}

}  // namespace

// ---------------------------------------------------------------------------
// Geometry

LatticeGeometry build_torus(int m, double L, int N, StencilOrder order) {
  if (m != 1 && m != 2) throw InvalidArgument("build_torus: complex dimension must be 1 or 2");
  if (!(L > 0.0) || !std::isfinite(L)) throw InvalidArgument("build_torus: side length must be positive");
  if (N < 4) throw InvalidArgument("build_torus: need at least 4 sites per axis");
  if (N % 2 != 0) throw InvalidArgument("build_torus: sites per axis must be even");
  LatticeGeometry g;
  g.m_ = m;
  g.length_ = L;
  g.n_ = N;
  g.spacing_ = L / N;
  g.order_ = order;
  g.volume_ = std::pow(L, 2 * m);
  g.cell_ = std::pow(g.spacing_, 2 * m);
  std::size_t stride = 1;
  for (int a = 0; a < 2 * m; ++a) {
    g.strides_[a] = stride;
    stride *= static_cast<std::size_t>(N);
  }
  g.sites_ = stride;
  return g;
}

std::size_t LatticeGeometry::site_at(std::span<const int> coords) const {
  std::size_t s = 0;
  for (int a = 0; a < real_dim(); ++a) {
    int c = ((coords[a] % n_) + n_) % n_;
    s += static_cast<std::size_t>(c) * strides_[a];
  }
  return s;
}

std::span<const double> LatticeGeometry::stencil_weights() const {
  if (order_ == StencilOrder::second) return kSecondOrder;
  return kFourthOrder;
}

// ---------------------------------------------------------------------------
// Form bases

FormBasis::FormBasis(int dims, int degree) : dims_(dims), degree_(degree), index_(1u << dims, -1) {
  std::vector<std::vector<int>> tuples;
  for (unsigned m = 0; m < (1u << dims); ++m) {
    if (std::popcount(m) != degree) continue;
    masks_.push_back(m);
  }
  auto tuple_of = [dims](unsigned m) {
    std::vector<int> t;
    for (int a = 0; a < dims; ++a)
      if (m & (1u << a)) t.push_back(a);
    return t;
  };
  std::sort(masks_.begin(), masks_.end(),
            [&](unsigned a, unsigned b) { return tuple_of(a) < tuple_of(b); });
  for (int i = 0; i < static_cast<int>(masks_.size()); ++i) index_[masks_[i]] = i;
}

const FormBasis& FormBasis::get(int dims, int degree) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, FormBasis*> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(dims, degree);
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;
  auto* b = new FormBasis(dims, degree);
  cache.emplace(key, b);
  return *b;
}

// ---------------------------------------------------------------------------
// FormField

FormField::FormField(const LatticeGeometry& geom, int degree, ValueShape shape)
    : geom_(geom), degree_(degree), shape_(shape) {
  if (degree < 0 || degree > geom.real_dim()) throw InvalidArgument("FormField: degree out of range");
  ncomp_ = FormBasis::get(geom.real_dim(), degree).size();
  data_.assign(static_cast<std::size_t>(ncomp_) * geom.site_count() * shape.size(), cplx(0.0));
}

FormField& FormField::operator+=(const FormField& o) {
  require_same_layout(*this, o, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

FormField& FormField::operator-=(const FormField& o) {
  require_same_layout(*this, o, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

FormField& FormField::operator*=(cplx s) {
  for (auto& v : data_) v *= s;
  return *this;
}

FormField& FormField::axpy(cplx s, const FormField& o) {
  require_same_layout(*this, o, "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
  return *this;
}

void FormField::fill(cplx v) { std::fill(data_.begin(), data_.end(), v); }

double FormField::max_abs() const {
  double m = 0.0;
  for (const auto& v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool FormField::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

FormField operator+(FormField a, const FormField& b) { return a += b; }
FormField operator-(FormField a, const FormField& b) { return a -= b; }
FormField operator*(cplx s, FormField a) { return a *= s; }

// ---------------------------------------------------------------------------
// Difference operators

void axis_difference(const FormField& f, int comp, int axis, std::size_t site, cplx* out) {
  const auto& g = f.geometry();
  const int w = f.shape().size();
  const auto weights = g.stencil_weights();
  const double inv_h = 1.0 / g.spacing();
  for (int e = 0; e < w; ++e) out[e] = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const int step = static_cast<int>(k) + 1;
    const cplx* fwd = f.at(comp, g.shift(site, axis, step));
    const cplx* bwd = f.at(comp, g.shift(site, axis, -step));
    const double c = weights[k] * inv_h;
    for (int e = 0; e < w; ++e) out[e] += c * (fwd[e] - bwd[e]);
  }
}

FormField exterior_derivative(const FormField& f) {
  const auto& g = f.geometry();
  const int D = g.real_dim();
  const int p = f.degree();
  if (p >= D) throw InvalidArgument("exterior_derivative: degree overflow");
  FormField out(g, p + 1, f.shape());
  const auto& in_basis = FormBasis::get(D, p);
  const auto& out_basis = FormBasis::get(D, p + 1);
  const int w = f.shape().size();
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    std::array<cplx, 4> tmp{};
    for (int oc = 0; oc < out_basis.size(); ++oc) {
      const unsigned M = out_basis.mask(oc);
      for (int mu = 0; mu < D; ++mu) {
        if (!(M & (1u << mu))) continue;
        const int ic = in_basis.index(M & ~(1u << mu));
        const double sign = (popcount_below(M, mu) % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t s = begin; s < end; ++s) {
          axis_difference(f, ic, mu, s, tmp.data());
          cplx* o = out.at(oc, s);
          for (int e = 0; e < w; ++e) o[e] += sign * tmp[e];
        }
      }
    }
  });
  return out;
}

FormField codifferential(const FormField& gf) {
  const auto& g = gf.geometry();
  const int D = g.real_dim();
  const int p = gf.degree();
  if (p < 1) throw InvalidArgument("codifferential: degree must be at least 1");
  FormField out(g, p - 1, gf.shape());
  const auto& in_basis = FormBasis::get(D, p);
  const auto& out_basis = FormBasis::get(D, p - 1);
  const int w = gf.shape().size();
  parallel_blocks(g.site_count(), [&](std::size_t begin, std::size_t end) {
    std::array<cplx, 4> tmp{};
    for (int oc = 0; oc < out_basis.size(); ++oc) {
      const unsigned K = out_basis.mask(oc);
      for (int mu = 0; mu < D; ++mu) {
        if (K & (1u << mu)) continue;
        const unsigned M = K | (1u << mu);
        const int ic = in_basis.index(M);
        // adjoint of a central difference is its negative
        const double sign = (popcount_below(M, mu) % 2 == 0) ? -1.0 : 1.0;
        for (std::size_t s = begin; s < end; ++s) {
          axis_difference(gf, ic, mu, s, tmp.data());
          cplx* o = out.at(oc, s);
          for (int e = 0; e < w; ++e) o[e] += sign * tmp[e];
        }
      }
    }
  });
  return out;
}

FormField lambda_contract(const FormField& F) {
  if (F.degree() != 2) throw InvalidArgument("lambda_contract: expects a 2-form");
  const auto& g = F.geometry();
  FormField out(g, 0, F.shape());
  const auto& basis = FormBasis::get(g.real_dim(), 2);
  const int w = F.shape().size();
  for (int j = 0; j < g.complex_dim(); ++j) {
    const int c = basis.index((1u << (2 * j)) | (1u << (2 * j + 1)));
    for (std::size_t s = 0; s < g.site_count(); ++s) {
      const cplx* src = F.at(c, s);
      cplx* dst = out.at(0, s);
      for (int e = 0; e < w; ++e) dst[e] += src[e];
    }
  }
  return out;
}

FormField wedge_omega(const FormField& f) {
  if (f.degree() != 0) throw InvalidArgument("wedge_omega: expects a 0-form");
  const auto& g = f.geometry();
  FormField out(g, 2, f.shape());
  const auto& basis = FormBasis::get(g.real_dim(), 2);
  const int w = f.shape().size();
  for (int j = 0; j < g.complex_dim(); ++j) {
    const int c = basis.index((1u << (2 * j)) | (1u << (2 * j + 1)));
    for (std::size_t s = 0; s < g.site_count(); ++s) {
      const cplx* src = f.at(0, s);
      cplx* dst = out.at(c, s);
      for (int e = 0; e < w; ++e) dst[e] = src[e];
    }
  }
  return out;
}

double inner(const FormField& f, const FormField& g) {
  require_same_layout(f, g, "inner");
  const auto fd = f.data();
  const auto gd = g.data();
  const std::size_t per_site = static_cast<std::size_t>(f.shape().size());
  const std::size_t sites = f.sites();
  const int ncomp = f.components();
  // reduce per site over components so the sum order is the same for any thread count
  auto total = parallel_sum(sites, 1, [&](std::size_t s, double* acc) {
    double v = 0.0;
    for (int c = 0; c < ncomp; ++c) {
      const std::size_t base = (static_cast<std::size_t>(c) * sites + s) * per_site;
      for (std::size_t e = 0; e < per_site; ++e) v += (fd[base + e] * std::conj(gd[base + e])).real();
    }
    acc[0] += v;
  });
  return total[0] * f.geometry().cell_volume();
}

double norm(const FormField& f) { return std::sqrt(std::max(0.0, inner(f, f))); }

// ---------------------------------------------------------------------------
// Complex types

namespace {

// e_a = sum_c T[a][c] c_c, with c = (dz_1..dz_m, dzbar_1..dzbar_m).
cplx to_complex_basis(int a, int c, int m) {
  const int j = a / 2;
  const bool is_y = a % 2 == 1;
  const bool holo = c < m;
  const int cj = holo ? c : c - m;
  if (cj != j) return 0.0;
  if (!is_y) return 0.5;
  return holo ? cplx(0.0, -0.5) : cplx(0.0, 0.5);
}

// c_c = sum_a S[c][a] e_a
cplx to_real_basis(int c, int a, int m) {
  const int j = a / 2;
  const bool is_y = a % 2 == 1;
  const bool holo = c < m;
  const int cj = holo ? c : c - m;
  if (cj != j) return 0.0;
  if (!is_y) return 1.0;
  return holo ? cplx(0.0, 1.0) : cplx(0.0, -1.0);
}

std::vector<cplx> build_projector(int dims, int p, int q) {
  const int m = dims / 2;
  const int degree = p + q;
  const auto& basis = FormBasis::get(dims, degree);
  const int C = basis.size();
  std::vector<cplx> P(static_cast<std::size_t>(C) * C, cplx(0.0));
  if (degree == 0) {
    P[0] = (p == 0 && q == 0) ? 1.0 : 0.0;
    return P;
  }
  if (degree == 1) {
    for (int a = 0; a < dims; ++a)
      for (int a2 = 0; a2 < dims; ++a2) {
        cplx s = 0.0;
        for (int c = 0; c < dims; ++c) {
          const int holo = c < m ? 1 : 0;
          if (holo != p) continue;
          s += to_complex_basis(a, c, m) * to_real_basis(c, a2, m);
        }
        P[static_cast<std::size_t>(a2) * C + a] = s;
      }
    return P;
  }
  if (degree != 2) throw InvalidArgument("type_projector: degree must be at most 2");
  for (int in = 0; in < C; ++in) {
    const unsigned M = basis.mask(in);
    const int a = std::countr_zero(M);
    const int b = 31 - std::countl_zero(M);
    // K = T^T M T restricted to the requested type
    std::vector<cplx> K(static_cast<std::size_t>(dims) * dims, cplx(0.0));
    for (int c = 0; c < dims; ++c)
      for (int d = 0; d < dims; ++d) {
        const int holo = (c < m ? 1 : 0) + (d < m ? 1 : 0);
        if (holo != p) continue;
        K[c * dims + d] = to_complex_basis(a, c, m) * to_complex_basis(b, d, m) -
                          to_complex_basis(b, c, m) * to_complex_basis(a, d, m);
      }
    for (int out = 0; out < C; ++out) {
      const unsigned Mo = basis.mask(out);
      const int ao = std::countr_zero(Mo);
      const int bo = 31 - std::countl_zero(Mo);
      cplx s = 0.0;
      for (int c = 0; c < dims; ++c)
        for (int d = 0; d < dims; ++d) s += to_real_basis(c, ao, m) * K[c * dims + d] * to_real_basis(d, bo, m);
      P[static_cast<std::size_t>(out) * C + in] = s;
    }
  }
  return P;
}

}  // namespace

const std::vector<cplx>& type_projector(int dims, int p, int q) {
  if (p < 0 || q < 0 || p + q > 2) throw InvalidArgument("type_projector: unsupported type");
  if (p > dims / 2 || q > dims / 2) {
    static std::mutex zmu;
    static std::map<std::tuple<int, int, int>, std::vector<cplx>> zeros;
    std::lock_guard<std::mutex> lock(zmu);
    const int C = FormBasis::get(dims, p + q).size();
    auto [it, _] = zeros.try_emplace({dims, p, q}, static_cast<std::size_t>(C) * C, cplx(0.0));
    return it->second;
  }
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::vector<cplx>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(dims, p, q);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_projector(dims, p, q)).first;
  return it->second;
}

FormField type_project(const FormField& f, int p, int q) {
  if (f.degree() != p + q) throw InvalidArgument("type_project: degree does not match type");
  const auto& g = f.geometry();
  const auto& P = type_projector(g.real_dim(), p, q);
  const int C = f.components();
  const int w = f.shape().size();
  FormField out(g, f.degree(), f.shape());
  for (int oc = 0; oc < C; ++oc)
    for (int ic = 0; ic < C; ++ic) {
      const cplx coef = P[static_cast<std::size_t>(oc) * C + ic];
      if (coef == cplx(0.0)) continue;
      for (std::size_t s = 0; s < g.site_count(); ++s) {
        const cplx* src = f.at(ic, s);
        cplx* dst = out.at(oc, s);
        for (int e = 0; e < w; ++e) dst[e] += coef * src[e];
      }
    }
  return out;
}

TypeParts type_decompose(const FormField& F) {
  if (F.degree() != 2) throw InvalidArgument("type_decompose: expects a 2-form");
  return {type_project(F, 2, 0), type_project(F, 1, 1), type_project(F, 0, 2)};
}

FormField del(const FormField& f) {
  if (f.degree() == 0) return type_project(exterior_derivative(f), 1, 0);
  if (f.degree() != 1) throw InvalidArgument("del: degree 0 or 1 only");
  return type_project(exterior_derivative(type_project(f, 1, 0)), 2, 0) +
         type_project(exterior_derivative(type_project(f, 0, 1)), 1, 1);
}

FormField dbar(const FormField& f) {
  if (f.degree() == 0) return type_project(exterior_derivative(f), 0, 1);
  if (f.degree() != 1) throw InvalidArgument("dbar: degree 0 or 1 only");
  return type_project(exterior_derivative(type_project(f, 1, 0)), 1, 1) +
         type_project(exterior_derivative(type_project(f, 0, 1)), 0, 2);
}

FormField del_adjoint(const FormField& g) {
  if (g.degree() == 1) return codifferential(type_project(g, 1, 0));
  if (g.degree() != 2) throw InvalidArgument("del_adjoint: degree 1 or 2 only");
  return type_project(codifferential(type_project(g, 2, 0)), 1, 0) +
         type_project(codifferential(type_project(g, 1, 1)), 0, 1);
}

FormField dbar_adjoint(const FormField& g) {
  if (g.degree() == 1) return codifferential(type_project(g, 0, 1));
  if (g.degree() != 2) throw InvalidArgument("dbar_adjoint: degree 1 or 2 only");
  return type_project(codifferential(type_project(g, 1, 1)), 1, 0) +
         type_project(codifferential(type_project(g, 0, 2)), 0, 1);
}

}  // namespace kvf
