#include "mim/spectral.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <fftw3.h>
#include <fmt/format.h>

#include "mim/combinatorics.hpp"

namespace mim {

namespace {

struct Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex g_plan_mutex;
std::map<std::vector<int>, Plans> g_plans;

std::size_t spectrum_size(const GridSpec& g) {
  return g.size() / static_cast<std::size_t>(g.N1) * static_cast<std::size_t>(g.N1 / 2 + 1);
}

const Plans& plans_for(const GridSpec& g) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  std::vector<int> shape = g.shape();
  auto it = g_plans.find(shape);
  if (it != g_plans.end()) return it->second;
  std::vector<double> real(g.size());
  std::vector<fftw_complex> cplx(spectrum_size(g));
  Plans p;
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  p.r2c = fftw_plan_dft_r2c(g.dims(), shape.data(), real.data(), cplx.data(), flags);
  p.c2r = fftw_plan_dft_c2r(g.dims(), shape.data(), cplx.data(), real.data(), flags);
  if (!p.r2c || !p.c2r) throw ResourceError("FFTW planning failed");
  return g_plans.emplace(shape, p).first->second;
}

// Visits every stored coefficient of the half-complex layout.
template <class F>
void visit_modes(const GridSpec& g, F&& fn) {
  const int D = g.dims();
  if (D > kMaxDims) throw DomainError("too many dimensions");
  const int last = g.N1 / 2 + 1;
  std::vector<int> ext = g.shape();
  ext[static_cast<std::size_t>(D - 1)] = last;
  std::array<double, kMaxDims> dk{};
  for (int a = 0; a < D; ++a) dk[static_cast<std::size_t>(a)] = 2.0 * std::numbers::pi / g.period(a);
  Mode mode;
  mode.dims = D;
  std::array<int, kMaxDims> idx{};
  const std::size_t total = spectrum_size(g);
  for (std::size_t f = 0; f < total; ++f) {
    mode.flat = f;
    for (int a = 0; a < D; ++a) {
      const std::size_t ua = static_cast<std::size_t>(a);
      int n = g.extent(a);
      int i = idx[ua];
      int m = i <= n / 2 ? i : i - n;
      mode.m[ua] = m;
      mode.nyquist[ua] = (i == n / 2);
      mode.freq[ua] = m * dk[ua];
    }
    int il = idx[static_cast<std::size_t>(D - 1)];
    mode.weight = (il == 0 || il == g.N1 / 2) ? 1.0 : 2.0;
    fn(mode);
    for (int a = D - 1; a >= 0; --a) {
      const std::size_t ua = static_cast<std::size_t>(a);
      if (++idx[ua] < ext[ua]) break;
      idx[ua] = 0;
    }
  }
}

template <class F>
GridField multiply_modes(const GridField& f, F&& fn) {
  Spectrum s = forward(f);
  visit_modes(s.spec, [&](const Mode& m) { s.c[m.flat] *= fn(m); });
  return inverse(s);
}

}  // namespace

Spectrum forward(const GridField& f) {
  const GridSpec& g = f.spec();
  const Plans& p = plans_for(g);
  Spectrum s{g, std::vector<std::complex<double>>(spectrum_size(g))};
  std::vector<double> in = f.values();
  fftw_execute_dft_r2c(p.r2c, in.data(), reinterpret_cast<fftw_complex*>(s.c.data()));
  return s;
}

GridField inverse(const Spectrum& s) {
  const GridSpec& g = s.spec;
  const Plans& p = plans_for(g);
  std::vector<std::complex<double>> tmp = s.c;  // c2r overwrites its input
  std::vector<double> out(g.size());
  fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(tmp.data()), out.data());
  const double inv = 1.0 / static_cast<double>(g.size());
  for (double& v : out) v *= inv;
  return GridField(g, std::move(out));
}

void for_each_mode(const GridSpec& g, const std::function<void(const Mode&)>& fn) { visit_modes(g, fn); }

GridField apply_multiplier(const GridField& f, const Multiplier& mult) { return multiply_modes(f, mult); }

void apply_multiplier_inplace(Spectrum& s, const Multiplier& mult) {
  visit_modes(s.spec, [&](const Mode& m) { s.c[m.flat] *= mult(m); });
}

double psi_symbol(double t, const Mode& m) {
  double k2 = m.k2();
  return std::exp(-t * (m.freq[0] * m.freq[0] + k2 * k2));
}

GridField semigroup_convolve(const GridField& f, double t) {
  if (!(t > 0.0)) throw DomainError(fmt::format("semigroup_convolve needs t > 0, got {}", t));
  return multiply_modes(f, [t](const Mode& m) { return std::complex<double>(psi_symbol(t, m), 0.0); });
}

// Symbol of d0 - Laplacian. On the temporal Nyquist plane i*omega cannot act on
// a real field; |omega| is used there so the operator and its inverse stay
// consistent and real.
std::complex<double> heat_symbol(const Mode& m) {
  if (m.nyquist[0]) return {m.k2() + std::abs(m.freq[0]), 0.0};
  return {m.k2(), m.freq[0]};
}

GridField heat_solve(const GridField& f) {
  return multiply_modes(f, [](const Mode& m) {
    std::complex<double> sym = heat_symbol(m);
    if (std::abs(sym) == 0.0) return std::complex<double>(0.0, 0.0);
    return 1.0 / sym;
  });
}

GridField heat_operator(const GridField& f) {
  return multiply_modes(f, [](const Mode& m) { return heat_symbol(m); });
}

GridField laplacian(const GridField& f) {
  return multiply_modes(f, [](const Mode& m) { return std::complex<double>(-m.k2(), 0.0); });
}

std::complex<double> derivative_symbol(const std::vector<int>& n, const Mode& m) {
  std::complex<double> r(1.0, 0.0);
  for (std::size_t a = 0; a < n.size(); ++a) {
    if (n[a] == 0) continue;
    if (m.nyquist[a] && (n[a] % 2 == 1)) return 0.0;
    std::complex<double> ik(0.0, m.freq[a]);
    for (int j = 0; j < n[a]; ++j) r *= ik;
  }
  return r;
}

GridField derivative(const GridField& f, const std::vector<int>& n) {
  return multiply_modes(f, [&n](const Mode& m) { return derivative_symbol(n, m); });
}

double derivative_at(const Spectrum& s, const std::vector<int>& n, const SpaceTimePoint& x) {
  const GridSpec& g = s.spec;
  const std::vector<double> xc = x.coords(g);
  double acc = 0.0;
  visit_modes(g, [&](const Mode& m) {
    double phase = 0.0;
    for (int a = 0; a < m.dims; ++a) phase += m.freq[static_cast<std::size_t>(a)] * xc[static_cast<std::size_t>(a)];
    std::complex<double> v = s.c[m.flat] * derivative_symbol(n, m) * std::polar(1.0, phase);
    // conjugate partner contributes the complex conjugate; Nyquist/zero planes only the real part
    acc += m.weight * v.real();
  });
  return acc / static_cast<double>(g.size());
}

double sobolev_norm(const GridField& f, double s) {
  Spectrum sp = forward(f);
  long double acc = 0.0;
  visit_modes(sp.spec, [&](const Mode& m) {
    double k2 = m.k2();
    double w2 = m.freq[0] * m.freq[0] + k2 * k2;
    if (w2 == 0.0) return;
    acc += m.weight * std::norm(sp.c[m.flat]) * std::pow(w2, s / 2.0);
  });
  return std::sqrt(static_cast<double>(acc) * f.spec().cell_volume() / static_cast<double>(f.size()));
}

GridField kernel(const GridSpec& g, double t, const std::vector<int>& n) {
  if (!(t > 0.0)) throw DomainError("kernel needs t > 0");
  Spectrum s{g, std::vector<std::complex<double>>(spectrum_size(g))};
  visit_modes(g, [&](const Mode& m) { s.c[m.flat] = psi_symbol(t, m) * derivative_symbol(n, m); });
  GridField k = inverse(s);
  k *= 1.0 / g.cell_volume();
  return k;
}

double moment_bound_probe(const GridSpec& g, double t, const SpaceTimePoint& x, const SpaceTimePoint& y,
                          double theta, const std::vector<int>& n) {
  if (!(theta > -(g.d + 2))) throw DomainError("moment bound needs theta > -D");
  GridField k = kernel(g, t, n);
  const double q = std::pow(t, 0.25);
  const double r = parabolic_distance(g, x, y);
  SpaceTimePoint origin{std::vector<int>(static_cast<std::size_t>(g.dims()), 0)};
  SpaceTimePoint w = origin;
  long double acc = 0.0;
  std::vector<int>& idx = w.idx;
  for (std::size_t i = 0; i < k.size(); ++i) {
    acc += std::abs(k[i]) * std::pow(q + r + parabolic_distance(g, origin, w), theta);
    for (int a = g.dims() - 1; a >= 0; --a) {
      if (++idx[static_cast<std::size_t>(a)] < g.extent(a)) break;
      idx[static_cast<std::size_t>(a)] = 0;
    }
  }
  double lhs = static_cast<double>(acc) * g.cell_volume();
  return lhs / (std::pow(q, -parabolic_degree(n)) * std::pow(q + r, theta));
}

int parabolic_degree(const std::vector<int>& n) {
  int s = 2 * n[0];
  for (std::size_t a = 1; a < n.size(); ++a) s += n[a];
  return s;
}

std::vector<std::vector<int>> exponents_below(int d, double order) {
  std::vector<std::vector<int>> out;
  if (order <= 0.0) return out;
  std::vector<int> n(static_cast<std::size_t>(d + 1), 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t a, int deg) {
    if (a == n.size()) {
      out.push_back(n);
      return;
    }
    int w = a == 0 ? 2 : 1;
    for (int c = 0; deg + w * c < order - 1e-12; ++c) {
      n[a] = c;
      rec(a + 1, deg + w * c);
    }
    n[a] = 0;
  };
  rec(0, 0);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return parabolic_degree(a) < parabolic_degree(b); });
  return out;
}

GridField monomial_field(const GridSpec& g, const SpaceTimePoint& x, const std::vector<int>& n) {
  GridField out(g, 1.0);
  SpaceTimePoint y{std::vector<int>(static_cast<std::size_t>(g.dims()), 0)};
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::vector<double> h = displacement(g, x, y);
    double v = 1.0;
    for (std::size_t a = 0; a < n.size(); ++a)
      for (int j = 0; j < n[a]; ++j) v *= h[a];
    out[i] = v;
    for (int a = g.dims() - 1; a >= 0; --a) {
      if (++y.idx[static_cast<std::size_t>(a)] < g.extent(a)) break;
      y.idx[static_cast<std::size_t>(a)] = 0;
    }
  }
  return out;
}

TaylorResult taylor_subtract(const GridField& f, const SpaceTimePoint& x, double order) {
  TaylorResult r{f, {}};
  if (order <= 0.0) return r;
  if (order > 12.0) throw DomainError(fmt::format("Taylor order {} beyond the supported range", order));
  const GridSpec& g = f.spec();
  for (int a = 0; a < g.dims(); ++a)
    if (order / (a == 0 ? 2.0 : 1.0) >= g.extent(a) / 4.0)
      throw DomainError("Taylor order exceeds the grid resolution");
  Spectrum s = forward(f);
  for (const auto& n : exponents_below(g.d, order)) {
    double dn = derivative_at(s, n, x);
    r.derivatives.emplace_back(n, dn);
    r.remainder.axpy(-dn / factorial(n), monomial_field(g, x, n));
  }
  return r;
}

}  // namespace mim
