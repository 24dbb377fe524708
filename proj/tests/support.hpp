#pragma once

// Shared fixtures for the unit tests: deterministic random fields and refinement fits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "kvf/bundle.hpp"
#include "kvf/lattice.hpp"

namespace kvf::testing {

inline const double kPi = 3.14159265358979323846;
inline const double kStandardL = std::sqrt(4.0 * kPi);  // area 4 pi

/// Independent uniform [-1, 1] + i[-1, 1] entries (rough data).
inline FormField random_field(const LatticeGeometry& g, int degree, ValueShape shape, std::uint64_t seed) {
  FormField f(g, degree, shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (cplx& z : f.data()) z = cplx(u(rng), u(rng));
  return f;
}

/// Band-limited trigonometric field: every component entry is an independent
/// trigonometric polynomial with wave numbers in [-K, K] per axis, so the same
/// seed gives samples of one continuum field at every resolution.
inline FormField smooth_field(const LatticeGeometry& g, int degree, ValueShape shape, std::uint64_t seed, int K = 2) {
  FormField f(g, degree, shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::size_t count = 1;
  for (int a = 0; a < g.real_dim(); ++a) count *= static_cast<std::size_t>(2 * K + 1);
  for (int c = 0; c < f.components(); ++c) {
    for (int e = 0; e < shape.size(); ++e) {
      std::vector<cplx> coeffs(count);
      for (std::size_t k = 0; k < count; ++k) {
        std::size_t rest = k;
        double k2 = 0.0;
        for (int a = 0; a < g.real_dim(); ++a) {
          const double ka = static_cast<double>(rest % static_cast<std::size_t>(2 * K + 1)) - K;
          rest /= static_cast<std::size_t>(2 * K + 1);
          k2 += ka * ka;
        }
        coeffs[k] = cplx(n01(rng), n01(rng)) / (1.0 + k2);
      }
      const auto vals = evaluate_trigonometric(g, K, coeffs);
      for (std::size_t x = 0; x < g.site_count(); ++x) f.at(c, x)[e] = vals[x];
    }
  }
  return f;
}

/// Pointwise anti-Hermitian part of a matrix-valued field.
inline FormField anti_hermitian(FormField f) {
  const int n = f.shape().rows;
  for (int c = 0; c < f.components(); ++c)
    for (std::size_t x = 0; x < f.sites(); ++x) anti_hermitian_part(Mat::load(f.at(c, x), n)).store(f.at(c, x));
  return f;
}

/// Takes the real part of every entry.
inline FormField real_part(FormField f) {
  for (cplx& z : f.data()) z = z.real();
  return f;
}

/// Observed orders log2(e_k / e_{k+1}) of a sequence of errors at halving spacing.
inline std::vector<double> observed_orders(const std::vector<double>& errors) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) out.push_back(std::log2(errors[k] / errors[k + 1]));
  return out;
}

/// Refinement rule: each halving of h either reduces the error at order >= min_order
/// or lands at rounding level (the discrete identity then holds exactly).
inline bool converges(const std::vector<double>& errors, double min_order = 1.8, double rounding = 1e-11) {
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (errors[k + 1] <= rounding) continue;
    if (!(std::log2(errors[k] / errors[k + 1]) >= min_order)) return false;
  }
  return true;
}

}  // namespace kvf::testing
