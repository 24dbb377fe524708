#include "kvf/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kvf {

namespace {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  template <class T>
  void put(T v) {
    v = to_little(v);
    bytes(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write to '" + path_ + "' failed");
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
  }
  void bytes(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (!in_) throw IoError("'" + path_ + "' is truncated");
  }
  template <class T>
  T get() {
    T v;
    bytes(reinterpret_cast<char*>(&v), sizeof(T));
    return to_little(v);
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw IoError("'" + path_ + "' has trailing data");
  }

 private:
  std::ifstream in_;
  std::string path_;
};

struct Header {
  std::uint32_t m, N, n;
  std::int32_t d;
  double L;
};

void put_header(Writer& w, const char* magic, const LatticeGeometry& g, const BundleSpec& spec) {
  w.bytes(magic, 4);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.complex_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.sites_per_axis()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.rank));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.degree));
  w.put<double>(g.length());
}

Header get_header(Reader& r, const char* magic) {
  char tag[4];
  r.bytes(tag, 4);
  if (std::memcmp(tag, magic, 4) != 0) throw IoError(std::string("bad magic, expected ") + magic);
  Header h{};
  h.m = r.get<std::uint32_t>();
  h.N = r.get<std::uint32_t>();
  h.n = r.get<std::uint32_t>();
  h.d = static_cast<std::int32_t>(r.get<std::uint32_t>());
  h.L = r.get<double>();
  return h;
}

void put_field(Writer& w, const FormField& f) {
  for (const cplx& z : f.data()) {
    w.put<double>(z.real());
    w.put<double>(z.imag());
  }
}

void get_field(Reader& r, FormField& f) {
  for (cplx& z : f.data()) {
    const double re = r.get<double>();
    const double im = r.get<double>();
    z = cplx(re, im);
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trace_to_csv(const DiagnosticsTrace& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const auto& r : trace) {
    const double vals[] = {r.t,          r.ymh,           r.vortex_fn,    r.sup_phi_sq,      r.sup_ehat,
                           r.sup_lambdaF, r.dbar_residual, r.f02_residual, r.moment_inf_norm, r.dt_used};
    for (std::size_t i = 0; i < std::size(vals); ++i) {
      if (i) out += ',';
      out += format_double(vals[i]);
    }
    out += '\n';
  }
  return out;
}

DiagnosticsTrace trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw IoError("trace csv: unexpected header");
  DiagnosticsTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double v[10];
    std::istringstream ls(line);
    std::string cell;
    int k = 0;
    while (std::getline(ls, cell, ',')) {
      if (k >= 10) throw IoError("trace csv: too many columns");
      try {
        v[k++] = std::stod(cell);
      } catch (...) {
        throw IoError("trace csv: bad number '" + cell + "'");
      }
    }
    if (k != 10) throw IoError("trace csv: expected 10 columns");
    TraceRow r;
    r.t = v[0];
    r.ymh = v[1];
    r.vortex_fn = v[2];
    r.sup_phi_sq = v[3];
    r.sup_ehat = v[4];
    r.sup_lambdaF = v[5];
    r.dbar_residual = v[6];
    r.f02_residual = v[7];
    r.moment_inf_norm = v[8];
    r.dt_used = v[9];
    trace.push_back(r);
  }
  return trace;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw IoError("write to '" + path + "' failed");
}

void write_trace_csv(const std::string& path, const DiagnosticsTrace& trace) { write_text(path, trace_to_csv(trace)); }

DiagnosticsTrace read_trace_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::stringstream ss;
  ss << f.rdbuf();
  return trace_from_csv(ss.str());
}

void write_state(const std::string& path, const FieldState& s, double tau, double t) {
  Writer w(path);
  put_header(w, "KVF1", s.geometry(), s.spec());
  w.put<double>(tau);
  w.put<double>(t);
  put_field(w, s.A());
  put_field(w, s.phi());
  w.finish();
}

StoredState read_state(const std::string& path, StencilOrder order) {
  Reader r(path);
  const Header h = get_header(r, "KVF1");
  StoredState out;
  out.tau = r.get<double>();
  out.t = r.get<double>();
  const auto geom = build_torus(static_cast<int>(h.m), h.L, static_cast<int>(h.N), order);
  out.state = FieldState(BundleSpec{static_cast<int>(h.n), h.d}, geom);
  get_field(r, out.state.A());
  get_field(r, out.state.phi());
  r.expect_end();
  return out;
}

void write_u_star(const std::string& path, const MetricState& ms, double tau) {
  Writer w(path);
  put_header(w, "KVU1", ms.base.geometry(), ms.base.spec());
  w.put<double>(tau);
  for (const cplx& z : ms.u.data()) w.put<double>(z.real());
  w.finish();
}

std::pair<FormField, double> read_u_star(const std::string& path, StencilOrder order) {
  Reader r(path);
  const Header h = get_header(r, "KVU1");
  const double tau = r.get<double>();
  const auto geom = build_torus(static_cast<int>(h.m), h.L, static_cast<int>(h.N), order);
  FormField u(geom, 0, ValueShape::scalar());
  for (cplx& z : u.data()) z = r.get<double>();
  r.expect_end();
  return {std::move(u), tau};
}

}  // namespace kvf
