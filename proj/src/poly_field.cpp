#include "mim/poly_field.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mim/combinatorics.hpp"

namespace mim {

namespace {

int degree_of(const PolyField::Exponent& m) { return parabolic_degree(m); }

double power_of(const std::vector<double>& v, const PolyField::Exponent& m) {
  double r = 1.0;
  for (std::size_t a = 0; a < m.size(); ++a)
    for (int j = 0; j < m[a]; ++j) r *= v[a];
  return r;
}

bool leq(const PolyField::Exponent& a, const PolyField::Exponent& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

PolyField::Exponent minus(PolyField::Exponent m, const PolyField::Exponent& j) {
  for (std::size_t i = 0; i < m.size(); ++i) m[i] -= j[i];
  return m;
}

// All exponents j <= m componentwise.
std::vector<PolyField::Exponent> below(const PolyField::Exponent& m) {
  std::vector<PolyField::Exponent> out{PolyField::Exponent(m.size(), 0)};
  for (std::size_t a = 0; a < m.size(); ++a) {
    std::vector<PolyField::Exponent> next;
    for (const auto& e : out)
      for (int v = 0; v <= m[a]; ++v) {
        auto f = e;
        f[a] = v;
        next.push_back(f);
      }
    out = std::move(next);
  }
  return out;
}

PolyField::Exponent unit(int dims, int axis, int times = 1) {
  PolyField::Exponent e(static_cast<std::size_t>(dims), 0);
  e[static_cast<std::size_t>(axis)] = times;
  return e;
}

// d^n (Q (.-a)^m) at y, from the spectrum of Q; delta = y - a.
double term_derivative(const Spectrum& q, const PolyField::Exponent& m, const std::vector<int>& n,
                       const std::vector<double>& delta, const SpaceTimePoint& y) {
  double acc = 0.0;
  for (const auto& j : below(n)) {
    if (!leq(j, m)) continue;
    // d^j (.-a)^m = m!/(m-j)! (.-a)^{m-j}
    double poly = factorial(m) / factorial(minus(m, j)) * power_of(delta, minus(m, j));
    if (poly == 0.0) continue;
    acc += binomial(n, j) * poly * mim::derivative_at(q, minus(n, j), y);
  }
  return acc;
}

}  // namespace

PolyField PolyField::periodic(GridField q, SpaceTimePoint anchor) {
  PolyField p(q.spec(), std::move(anchor));
  p.add_term(Exponent(static_cast<std::size_t>(q.spec().dims()), 0), q);
  return p;
}

PolyField PolyField::monomial(const GridSpec& spec, SpaceTimePoint anchor, const Exponent& m, double coeff) {
  PolyField p(spec, std::move(anchor));
  p.add_term(m, GridField(spec, coeff));
  return p;
}

PolyField PolyField::constant(const GridSpec& spec, SpaceTimePoint anchor, double c) {
  return monomial(spec, std::move(anchor), Exponent(static_cast<std::size_t>(spec.dims()), 0), c);
}

const GridField& PolyField::coeff(const Exponent& m) const {
  static const GridField empty;
  auto it = terms_.find(m);
  return it == terms_.end() ? empty : it->second;
}

int PolyField::degree() const {
  int d = -1;
  for (const auto& [m, q] : terms_) d = std::max(d, degree_of(m));
  return d;
}

void PolyField::add_term(const Exponent& m, const GridField& q, double s) {
  if (q.is_zero() || s == 0.0) return;
  if (static_cast<int>(m.size()) != spec_.dims()) throw DomainError("exponent length does not match grid");
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    GridField f = q;
    if (s != 1.0) f *= s;
    terms_.emplace(m, std::move(f));
  } else {
    it->second.axpy(s, q);
  }
}

void PolyField::axpy(double s, const PolyField& o) {
  if (o.is_zero()) return;
  if (is_zero() && anchor_.idx.empty()) {
    spec_ = o.spec_;
    anchor_ = o.anchor_;
  }
  if (!(o.anchor_ == anchor_)) throw DomainError("PolyField anchors differ");
  for (const auto& [m, q] : o.terms_) add_term(m, q, s);
}

PolyField& PolyField::operator+=(const PolyField& o) {
  axpy(1.0, o);
  return *this;
}

PolyField& PolyField::operator-=(const PolyField& o) {
  axpy(-1.0, o);
  return *this;
}

PolyField& PolyField::operator*=(double s) {
  for (auto& [m, q] : terms_) q *= s;
  return *this;
}

PolyField PolyField::reanchored(const SpaceTimePoint& b) const {
  PolyField out(spec_, b);
  if (b == anchor_) {
    out.terms_ = terms_;
    return out;
  }
  const std::vector<double> delta = displacement(spec_, anchor_, b);
  for (const auto& [m, q] : terms_)
    for (const auto& j : below(m)) {
      double c = binomial(m, j) * power_of(delta, minus(m, j));
      out.add_term(j, q, c);
    }
  return out;
}

double PolyField::eval(const SpaceTimePoint& y) const {
  if (terms_.empty()) return 0.0;
  const std::vector<double> delta = displacement(spec_, anchor_, y);
  double s = 0.0;
  for (const auto& [m, q] : terms_) s += q.at(y) * power_of(delta, m);
  return s;
}

double PolyField::derivative_at(const std::vector<int>& n, const SpaceTimePoint& y) const {
  const std::vector<double> delta = displacement(spec_, anchor_, y);
  double s = 0.0;
  for (const auto& [m, q] : terms_) s += term_derivative(forward(q), m, n, delta, y);
  return s;
}

GridField PolyField::sampled() const {
  GridField out(spec_);
  if (terms_.empty()) return out;
  for (const auto& [m, q] : terms_) {
    GridField mono = monomial_field(spec_, anchor_, m);
    out += q * mono;
  }
  return out;
}

PolyField PolyField::laplacian() const {
  PolyField out(spec_, anchor_);
  const int D = spec_.dims();
  for (const auto& [m, q] : terms_) {
    out.add_term(m, mim::laplacian(q));
    for (int a = 1; a < D; ++a) {
      const int ma = m[static_cast<std::size_t>(a)];
      if (ma >= 1) out.add_term(minus(m, unit(D, a)), derivative(q, unit(D, a)), 2.0 * ma);
      if (ma >= 2) out.add_term(minus(m, unit(D, a, 2)), q, static_cast<double>(ma * (ma - 1)));
    }
  }
  return out;
}

PolyField PolyField::heat_operator() const {
  PolyField out(spec_, anchor_);
  const int D = spec_.dims();
  for (const auto& [m, q] : terms_) {
    out.add_term(m, mim::heat_operator(q));
    if (m[0] >= 1) out.add_term(minus(m, unit(D, 0)), q, static_cast<double>(m[0]));
    for (int a = 1; a < D; ++a) {
      const int ma = m[static_cast<std::size_t>(a)];
      if (ma >= 1) out.add_term(minus(m, unit(D, a)), derivative(q, unit(D, a)), -2.0 * ma);
      if (ma >= 2) out.add_term(minus(m, unit(D, a, 2)), q, -static_cast<double>(ma * (ma - 1)));
    }
  }
  return out;
}

PolyField PolyField::heat_solve() const {
  PolyField out(spec_, anchor_);
  const int D = spec_.dims();
  Terms work = terms_;
  while (!work.empty()) {
    // highest parabolic degree first; all pushes go strictly lower
    auto top = work.begin();
    for (auto it = work.begin(); it != work.end(); ++it)
      if (degree_of(it->first) > degree_of(top->first)) top = it;
    const Exponent m = top->first;
    GridField r = mim::heat_solve(top->second);
    work.erase(top);
    auto push = [&](const Exponent& e, const GridField& f, double s) {
      if (f.is_zero() || s == 0.0) return;
      auto it = work.find(e);
      if (it == work.end()) {
        GridField g = f;
        g *= s;
        work.emplace(e, std::move(g));
      } else {
        it->second.axpy(s, f);
      }
    };
    if (m[0] >= 1) push(minus(m, unit(D, 0)), r, -static_cast<double>(m[0]));
    for (int a = 1; a < D; ++a) {
      const int ma = m[static_cast<std::size_t>(a)];
      if (ma >= 1) push(minus(m, unit(D, a)), derivative(r, unit(D, a)), 2.0 * ma);
      if (ma >= 2) push(minus(m, unit(D, a, 2)), r, static_cast<double>(ma * (ma - 1)));
    }
    out.add_term(m, r);
  }
  return out;
}

PolyField PolyField::smoothed(double t) const {
  if (!(t > 0.0)) throw DomainError(fmt::format("smoothing needs t > 0, got {}", t));
  PolyField out(spec_, anchor_);
  const SpaceTimePoint origin{std::vector<int>(static_cast<std::size_t>(spec_.dims()), 0)};
  const GridField psi = kernel(spec_, t, std::vector<int>(static_cast<std::size_t>(spec_.dims()), 0));
  std::map<Exponent, Spectrum> kernels;
  auto kernel_for = [&](const Exponent& l) -> const Spectrum& {
    auto it = kernels.find(l);
    if (it != kernels.end()) return it->second;
    return kernels.emplace(l, forward(psi * monomial_field(spec_, origin, l))).first->second;
  };
  const double vol = spec_.cell_volume();
  for (const auto& [m, q] : terms_) {
    Spectrum qs = forward(q);
    for (const auto& l : below(m)) {
      const Spectrum& ks = kernel_for(l);
      Spectrum prod = qs;
      for (std::size_t i = 0; i < prod.c.size(); ++i) prod.c[i] *= ks.c[i] * vol;
      int total = 0;
      for (int v : l) total += v;
      const double sign = total % 2 == 0 ? 1.0 : -1.0;
      out.add_term(minus(m, l), inverse(prod), sign * binomial(m, l));
    }
  }
  return out;
}

PolyField::Taylor PolyField::taylor_subtract(double order) const {
  Taylor r{*this, {}};
  if (order <= 0.0) return r;
  if (order > 12.0) throw DomainError(fmt::format("Taylor order {} beyond the supported range", order));
  for (int a = 0; a < spec_.dims(); ++a)
    if (order / (a == 0 ? 2.0 : 1.0) >= spec_.extent(a) / 4.0)
      throw DomainError("Taylor order exceeds the grid resolution");
  std::map<Exponent, Spectrum> spectra;
  for (const auto& [m, q] : terms_) spectra.emplace(m, forward(q));
  const std::vector<double> zero(static_cast<std::size_t>(spec_.dims()), 0.0);
  for (const auto& n : exponents_below(spec_.d, order)) {
    double dn = 0.0;
    for (const auto& [m, q] : terms_) dn += term_derivative(spectra.at(m), m, n, zero, anchor_);
    r.derivatives.emplace_back(n, dn);
    r.remainder.add_term(n, GridField(spec_, 1.0), -dn / factorial(n));
  }
  return r;
}

double PolyField::non_polynomial_norm() const {
  double s = 0.0;
  for (const auto& [m, q] : terms_) {
    double mu = q.mean();
    for (double v : q.values()) s = std::max(s, std::abs(v - mu));
  }
  return s;
}

double PolyField::max_abs_window(const SpaceTimePoint& center) const {
  double s = 0.0;
  for (const auto& y : window_nodes(spec_, center)) s = std::max(s, std::abs(eval(y)));
  return s;
}

PolyField operator+(PolyField a, const PolyField& b) {
  a += b;
  return a;
}

PolyField operator-(PolyField a, const PolyField& b) {
  a -= b;
  return a;
}

PolyField operator*(double s, PolyField a) {
  a *= s;
  return a;
}

PolyField operator*(const PolyField& a, const PolyField& b) {
  if (a.is_zero() || b.is_zero()) return PolyField(a.is_zero() ? b.spec() : a.spec(), a.is_zero() ? b.anchor() : a.anchor());
  if (!(a.anchor() == b.anchor())) throw DomainError("PolyField anchors differ");
  PolyField out(a.spec(), a.anchor());
  for (const auto& [m, q] : a.terms())
    for (const auto& [j, r] : b.terms()) {
      PolyField::Exponent e = m;
      for (std::size_t i = 0; i < e.size(); ++i) e[i] += j[i];
      out.add_term(e, q * r);
    }
  return out;
}

std::vector<SpaceTimePoint> window_nodes(const GridSpec& g, const SpaceTimePoint& center, int stride) {
  std::vector<SpaceTimePoint> out;
  const int D = g.dims();
  std::vector<int> lo(static_cast<std::size_t>(D)), off(static_cast<std::size_t>(D));
  for (int a = 0; a < D; ++a) lo[static_cast<std::size_t>(a)] = off[static_cast<std::size_t>(a)] = -g.extent(a) / 4;
  while (true) {
    out.push_back(center.shifted(g, off));
    int a = D - 1;
    for (; a >= 0; --a) {
      auto ua = static_cast<std::size_t>(a);
      off[ua] += stride;
      if (off[ua] <= g.extent(a) / 4) break;
      off[ua] = lo[ua];
    }
    if (a < 0) break;
  }
  return out;
}

}  // namespace mim
