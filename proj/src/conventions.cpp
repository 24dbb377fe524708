#include "kvf/conventions.hpp"

#include <cstdio>
#include <string>

namespace kvf {

namespace {

constexpr std::string_view kSheet = R"(kvf convention sheet, version 1
geometry: torus (R/LZ)^{2m}, axes x1,y1,x2,y2, omega = sum dx_j ^ dy_j, z_j = x_j + i y_j
sites: cell centres (i + 1/2) h, h = L/N, site index with axis 0 fastest
derivatives: antisymmetric central stencils; order 2 {1/2}, order 4 {2/3, -1/12}
inner product: <a,b> = sum_sites sum_components Re tr(a^* b) h^{2m}
codifferential: exact adjoint of the discrete d under the inner product
connection: d_A = d + A, A anti-Hermitian; F_A = dA + A ^ A
degree: background A_bg = -(2 pi i d x / L^2) dy, twist phi(x + L, y) = exp(2 pi i d y / L) phi(x, y)
lambda: Lambda(dx_j ^ dy_j) = 1
moment map: Psi = Lambda F_A - (i/2)(phi phi^* - tau I)
energy: YMH = ||F_A||^2 + ||d_A phi||^2 + 1/4 ||phi phi^* - tau I||^2
identity: YMH = ||Psi||^2 + 4 ||F^{0,2}||^2 + 2 ||dbar_A phi||^2 + 2 pi tau C_1 - 8 pi^2 Ch_2
flow velocity: (dA/dt, dphi/dt) = -1/2 grad_{L2} YMH
metric flow: du/dt = Re(-i Lambda F_0) + tau/2 + Lap u - 1/2 |phi_0|^2 exp(2u), Lap = -d^* d
reconstruction: A = A_0 + (del - dbar) u, phi = exp(u) phi_0
bradlow threshold: tau_c = 4 pi d / L^2
final_state.bin: "KVF1", u32 {m,N,n,d}, f64 {L,tau,t_final}, A[direction][site][entry]{re,im}, phi[site][entry]{re,im}, little-endian
u_star.bin: "KVU1", u32 {m,N,n,d}, f64 {L,tau}, u[site], little-endian
)";

}  // namespace

std::string_view convention_sheet() { return kSheet; }

std::string_view convention_version() { return "1"; }

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view convention_hash() {
  static const std::string value = [] {
    char buf[40];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(kSheet)));
    return std::string(buf);
  }();
  return value;
}

}  // namespace kvf
