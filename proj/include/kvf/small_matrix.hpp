#pragma once

// Fixed-capacity complex vectors and matrices for fiber values of rank <= 2.

#include <array>
#include <cassert>
#include <complex>
#include <cmath>

namespace kvf {

using cplx = std::complex<double>;

inline constexpr int kMaxRank = 2;

struct Vec {
  int n = 1;
  std::array<cplx, kMaxRank> v{};

  static Vec zero(int n) {
    Vec r;
    r.n = n;
    return r;
  }
  static Vec load(const cplx* p, int n) {
    Vec r;
    r.n = n;
    for (int i = 0; i < n; ++i) r.v[i] = p[i];
    return r;
  }
  void store(cplx* p) const {
    for (int i = 0; i < n; ++i) p[i] = v[i];
  }

  cplx& operator[](int i) { return v[i]; }
  const cplx& operator[](int i) const { return v[i]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < n; ++i) v[i] += o.v[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < n; ++i) v[i] -= o.v[i];
    return *this;
  }
  Vec& operator*=(cplx s) {
    for (int i = 0; i < n; ++i) v[i] *= s;
    return *this;
  }
  double norm2() const {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::norm(v[i]);
    return s;
  }
};

inline Vec operator+(Vec a, const Vec& b) { return a += b; }
inline Vec operator-(Vec a, const Vec& b) { return a -= b; }
inline Vec operator*(cplx s, Vec a) { return a *= s; }
inline Vec operator*(Vec a, cplx s) { return a *= s; }

/// Row-major n x n matrix, n <= 2.
struct Mat {
  int n = 1;
  std::array<cplx, kMaxRank * kMaxRank> e{};

  static Mat zero(int n) {
    Mat r;
    r.n = n;
    return r;
  }
  static Mat identity(int n) {
    Mat r = zero(n);
    for (int i = 0; i < n; ++i) r(i, i) = 1.0;
    return r;
  }
  static Mat scalar(int n, cplx s) {
    Mat r = zero(n);
    for (int i = 0; i < n; ++i) r(i, i) = s;
    return r;
  }
  static Mat load(const cplx* p, int n) {
    Mat r;
    r.n = n;
    for (int i = 0; i < n * n; ++i) r.e[i] = p[i];
    return r;
  }
  void store(cplx* p) const {
    for (int i = 0; i < n * n; ++i) p[i] = e[i];
  }

  cplx& operator()(int r, int c) { return e[r * n + c]; }
  const cplx& operator()(int r, int c) const { return e[r * n + c]; }

  Mat& operator+=(const Mat& o) {
    for (int i = 0; i < n * n; ++i) e[i] += o.e[i];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    for (int i = 0; i < n * n; ++i) e[i] -= o.e[i];
    return *this;
  }
  Mat& operator*=(cplx s) {
    for (int i = 0; i < n * n; ++i) e[i] *= s;
    return *this;
  }

  Mat adjoint() const {
    Mat r = zero(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) = std::conj((*this)(j, i));
    return r;
  }
  cplx trace() const {
    cplx t = 0.0;
    for (int i = 0; i < n; ++i) t += (*this)(i, i);
    return t;
  }
  /// Squared Hilbert-Schmidt norm.
  double norm2() const {
    double s = 0.0;
    for (int i = 0; i < n * n; ++i) s += std::norm(e[i]);
    return s;
  }
  cplx det() const { return n == 1 ? e[0] : e[0] * e[3] - e[1] * e[2]; }
  Mat inverse() const {
    Mat r = zero(n);
    const cplx dt = det();
    if (n == 1) {
      r.e[0] = 1.0 / dt;
    } else {
      r.e[0] = e[3] / dt;
      r.e[1] = -e[1] / dt;
      r.e[2] = -e[2] / dt;
      r.e[3] = e[0] / dt;
    }
    return r;
  }
};

inline Mat operator+(Mat a, const Mat& b) { return a += b; }
inline Mat operator-(Mat a, const Mat& b) { return a -= b; }
inline Mat operator*(cplx s, Mat a) { return a *= s; }
inline Mat operator*(Mat a, cplx s) { return a *= s; }

inline Mat operator*(const Mat& a, const Mat& b) {
  assert(a.n == b.n);
  Mat r = Mat::zero(a.n);
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j) {
      cplx s = 0.0;
      for (int k = 0; k < a.n; ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  return r;
}

inline Vec operator*(const Mat& a, const Vec& x) {
  Vec r = Vec::zero(a.n);
  for (int i = 0; i < a.n; ++i) {
    cplx s = 0.0;
    for (int k = 0; k < a.n; ++k) s += a(i, k) * x[k];
    r[i] = s;
  }
  return r;
}

inline Mat commutator(const Mat& a, const Mat& b) { return a * b - b * a; }

/// x y^dagger
inline Mat outer(const Vec& x, const Vec& y) {
  Mat r = Mat::zero(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r(i, j) = x[i] * std::conj(y[j]);
  return r;
}

/// Anti-Hermitian part (X - X^dagger)/2.
inline Mat anti_hermitian_part(const Mat& x) { return 0.5 * (x - x.adjoint()); }

/// Re tr(a b^dagger), the real Hilbert-Schmidt pairing.
inline double hs_inner(const Mat& a, const Mat& b) {
  double s = 0.0;
  for (int i = 0; i < a.n * a.n; ++i) s += (a.e[i] * std::conj(b.e[i])).real();
  return s;
}

inline double vec_inner(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (int i = 0; i < a.n; ++i) s += (a[i] * std::conj(b[i])).real();
  return s;
}

}  // namespace kvf
