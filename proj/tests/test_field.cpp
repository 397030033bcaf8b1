#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include "mim/combinatorics.hpp"
#include "mim/spectral.hpp"

using namespace mim;

namespace {

constexpr double kPi = std::numbers::pi;

GridField random_field(const GridSpec& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  GridField f(g);
  for (auto& v : f.values()) v = n(rng);
  return f;
}

// f(y) = sum of a few smooth modes, with exact derivatives.
struct TrigField {
  GridSpec g;
  struct Term {
    int m0, m1;
    double a, b;
  };
  std::vector<Term> terms;

  double eval(const std::vector<double>& y, const std::vector<int>& n) const {
    double s = 0;
    for (const auto& t : terms) {
      double w = 2 * kPi * t.m0 / g.L0, k = 2 * kPi * t.m1 / g.L;
      double ph = w * y[0] + k * y[1];
      // d^n of a cos(ph) + b sin(ph)
      std::complex<double> z = std::complex<double>(t.a, -t.b) * std::polar(1.0, ph);
      z *= std::pow(std::complex<double>(0, w), n[0]) * std::pow(std::complex<double>(0, k), n[1]);
      s += z.real();
    }
    return s;
  }

  GridField field() const {
    GridField f(g);
    SpaceTimePoint p{{0, 0}};
    for (int i = 0; i < g.N0; ++i)
      for (int j = 0; j < g.N1; ++j) {
        p.idx = {i, j};
        f[f.flat(p)] = eval(p.coords(g), {0, 0});
      }
    return f;
  }
};

// Naive DFT derivative on small grids, independent of FFTW.
GridField naive_derivative(const GridField& f, int axis, int order) {
  const GridSpec& g = f.spec();
  GridField out(g);
  int N = g.extent(axis);
  double dk = 2 * kPi / g.period(axis);
  for (int i0 = 0; i0 < g.N0; ++i0)
    for (int i1 = 0; i1 < g.N1; ++i1) {
      std::vector<std::complex<double>> line(static_cast<std::size_t>(N));
      for (int j = 0; j < N; ++j) {
        SpaceTimePoint p{{axis == 0 ? j : i0, axis == 0 ? i1 : j}};
        line[static_cast<std::size_t>(j)] = f.at(p);
      }
      int self = axis == 0 ? i0 : i1;
      double acc = 0;
      for (int m = 0; m < N; ++m) {
        int ms = m <= N / 2 ? m : m - N;
        if (m == N / 2 && order % 2 == 1) continue;
        std::complex<double> c = 0;
        for (int j = 0; j < N; ++j) c += line[static_cast<std::size_t>(j)] * std::polar(1.0, -2 * kPi * m * j / N);
        std::complex<double> sym = std::pow(std::complex<double>(0, ms * dk), order);
        acc += (c * sym * std::polar(1.0, 2 * kPi * m * self / N)).real();
      }
      out[out.flat(SpaceTimePoint{{i0, i1}})] = acc / N;
    }
  return out;
}

}  // namespace

TEST_CASE("parabolic distance") {
  GridSpec g{1, 8, 8, 4.0, 4.0};
  SpaceTimePoint x{{2, 2}};
  CHECK(parabolic_distance(g, x, x) == 0.0);
  CHECK(parabolic_distance(g, SpaceTimePoint{{2, 2}}, SpaceTimePoint{{4, 2}}) == doctest::Approx(1.0));
  GridSpec g2{1, 16, 16, 4.0, 4.0};
  CHECK(parabolic_distance(g2, SpaceTimePoint{{0, 0}}, SpaceTimePoint{{1, 2}}) == doctest::Approx(1.0));
  // minimal image
  CHECK(parabolic_distance(g2, SpaceTimePoint{{0, 0}}, SpaceTimePoint{{0, 15}}) == doctest::Approx(0.25));
}

TEST_CASE("semigroup symbol and property") {
  GridSpec g{1, 32, 32, 1.0, 1.0};
  TrigField tf{g, {{2, 3, 1.5, 0.0}}};
  GridField f = tf.field();
  double t = 1e-4;
  GridField ft = semigroup_convolve(f, t);
  double w = 2 * kPi * 2, k = 2 * kPi * 3;
  double expect = std::exp(-t * (w * w + k * k * k * k));
  SpaceTimePoint p{{0, 0}};
  CHECK(ft.at(p) == doctest::Approx(1.5 * expect).epsilon(1e-12));

  GridField r = random_field(g, 1);
  GridField a = semigroup_convolve(semigroup_convolve(r, 2e-5), 3e-5);
  GridField b = semigroup_convolve(r, 5e-5);
  CHECK((a - b).max_abs() <= 1e-12 * b.max_abs());
  CHECK(semigroup_convolve(r, 1e-4).mean() == doctest::Approx(r.mean()).epsilon(1e-12));
  CHECK_THROWS_AS(semigroup_convolve(r, 0.0), DomainError);
}

TEST_CASE("semigroup agrees with time stepping of the defining equation") {
  GridSpec g{1, 8, 8, 1.0, 1.0};
  GridField f0 = random_field(g, 2);
  // d/dt f = d0^2 f - Lap^2 f, RK4 in physical space with naive DFT derivatives
  auto rhs = [](const GridField& f) {
    return naive_derivative(f, 0, 2) - naive_derivative(naive_derivative(f, 1, 2), 1, 2);
  };
  const double T = 2e-4;
  const int steps = 400;
  const double dt = T / steps;
  GridField f = f0;
  for (int s = 0; s < steps; ++s) {
    GridField k1 = rhs(f);
    GridField k2 = rhs(f + (dt / 2) * k1);
    GridField k3 = rhs(f + (dt / 2) * k2);
    GridField k4 = rhs(f + dt * k3);
    f = f + (dt / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  CHECK((f - semigroup_convolve(f0, T)).max_abs() <= 1e-6);
}

TEST_CASE("heat solve") {
  GridSpec g{1, 32, 16, 0.5, 1.0};
  TrigField tf{g, {{1, 2, 1.0, 0.0}}};
  GridField u = heat_solve(tf.field());
  double w = 2 * kPi * 1 / g.L0, k = 2 * kPi * 2;
  std::complex<double> amp = 1.0 / std::complex<double>(k * k, w);
  SpaceTimePoint p{{0, 0}};
  CHECK(u.at(p) == doctest::Approx(amp.real()).epsilon(1e-12));
  CHECK(heat_solve(GridField(g, 3.0)).max_abs() == 0.0);
  GridField r = random_field(g, 3);
  GridField back = heat_operator(heat_solve(r));
  GridField expect = r - GridField(g, r.mean());
  CHECK((back - expect).max_abs() <= 1e-10 * r.max_abs());
  // commutation with the semigroup
  GridField a = heat_solve(semigroup_convolve(r, 1e-4));
  GridField b = semigroup_convolve(heat_solve(r), 1e-4);
  CHECK((a - b).max_abs() <= 1e-13 * (1 + a.max_abs()));
}

TEST_CASE("scaling identity of the kernel") {
  GridSpec g{1, 64, 64, 1.0, 1.0};
  for (double t : {1e-4, 3e-5}) {
    double q = std::pow(t, 0.25);
    GridSpec gs = g;
    gs.L0 = g.L0 / (q * q);
    gs.L = g.L / q;
    GridField kt = kernel(g, t, {0, 0});
    GridField k1 = kernel(gs, 1.0, {0, 0});
    k1 *= std::pow(q, -3);
    CHECK((kt - k1).max_abs() <= 1e-8 * kt.max_abs());
  }
}

TEST_CASE("sobolev norm") {
  GridSpec g{1, 16, 16, 1.0, 1.0};
  CHECK(sobolev_norm(GridField(g), 0.7) == 0.0);
  TrigField tf{g, {{1, 1, 1.0, 0.0}}};
  double w = 2 * kPi, k = 2 * kPi;
  double s = -0.3;
  // cos mode: two conjugate modes of amplitude N/2 each
  double expected = std::sqrt(0.5) * std::pow(w * w + k * k * k * k, s / 4);
  CHECK(sobolev_norm(tf.field(), s) == doctest::Approx(expected).epsilon(1e-12));
  GridField r = random_field(g, 4);
  GridField centered = r - GridField(g, r.mean());
  CHECK(sobolev_norm(r, 0.0) == doctest::Approx(centered.l2_norm()).epsilon(1e-12));
}

TEST_CASE("spectral derivatives at a point") {
  GridSpec g{1, 32, 32, 0.25, 1.0};
  TrigField tf{g, {{1, 2, 0.7, -0.3}, {3, 1, 0.2, 0.5}}};
  GridField f = tf.field();
  Spectrum s = forward(f);
  SpaceTimePoint x{{5, 11}};
  for (std::vector<int> n : {std::vector<int>{0, 0}, {1, 0}, {0, 1}, {0, 2}, {1, 1}, {0, 3}}) {
    double ref = tf.eval(x.coords(g), n);
    CHECK(derivative_at(s, n, x) == doctest::Approx(ref).epsilon(1e-9).scale(1.0));
    CHECK(derivative(f, n).at(x) == doctest::Approx(ref).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("taylor subtraction") {
  GridSpec g{1, 128, 64, 1.0, 1.0};
  TrigField tf{g, {{1, 1, 0.7, -0.3}, {0, 2, 0.2, 0.5}}};
  GridField f = tf.field();
  SpaceTimePoint x = SpaceTimePoint::center(g);
  CHECK((taylor_subtract(f, x, 0.0).remainder - f).max_abs() == 0.0);

  auto r = taylor_subtract(f, x, 1.5);
  CHECK(r.derivatives.size() == 2);
  CHECK(std::abs(r.remainder.at(x)) <= 1e-12);
  // spatial central differences of the remainder vanish quadratically
  auto cd = [&](int c) { return r.remainder.at(x.shifted(g, {0, c})) - r.remainder.at(x.shifted(g, {0, -c})); };
  CHECK(cd(2) / cd(1) == doctest::Approx(8.0).epsilon(0.05));

  // remainder + polynomial reproduces f at every node
  GridField rebuilt = r.remainder;
  for (const auto& [n, dn] : r.derivatives) rebuilt.axpy(dn / factorial(n), monomial_field(g, x, n));
  CHECK((rebuilt - f).max_abs() <= 1e-12 * (1 + f.max_abs()));

  // coefficients match the analytic derivatives
  auto r3 = taylor_subtract(f, x, 3.5);
  for (const auto& [n, dn] : r3.derivatives)
    CHECK(dn == doctest::Approx(tf.eval(x.coords(g), n)).epsilon(1e-8).scale(1.0));

  // vanishing order near x
  auto probe = [&](const TaylorResult& tr, int r_cells) {
    return std::abs(tr.remainder.at(x.shifted(g, {0, r_cells})));
  };
  double ratio = probe(r3, 4) / probe(r3, 2);
  CHECK(ratio > std::pow(2.0, 3.0) * 0.8);
  CHECK_THROWS_AS(taylor_subtract(f, x, 13.0), DomainError);
}

TEST_CASE("moment bound ratios stay bounded over a t sweep") {
  GridSpec g;
  const double h = g.h(1);
  SpaceTimePoint x = SpaceTimePoint::center(g);
  for (std::vector<int> n : {std::vector<int>{0, 0}, {0, 1}, {1, 0}}) {
    for (double theta : {0.0, 0.45, -1.0}) {
      double lo = 1e300, hi = 0;
      for (int j = 0; j <= 6; ++j) {
        double t = 4096 * std::pow(h, 4) * std::pow(2.0, -j);
        double ratio = moment_bound_probe(g, t, x, x.shifted(g, {0, 3}), theta, n);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
      CAPTURE(theta);
      CHECK(hi < 20.0);
      CHECK(hi / lo < 4.0);
      if (theta == 0.0 && n == std::vector<int>{0, 0}) CHECK(lo >= 1.0 - 1e-9);
    }
  }
}

TEST_CASE("binary dump round trip") {
  GridSpec g{1, 8, 8, 1.0, 1.0};
  GridField f = random_field(g, 9);
  std::stringstream ss;
  f.write_binary(ss, {{"role", "xi"}, {"beta", "0"}});
  nlohmann::json h;
  GridField back = GridField::read_binary(ss, &h);
  CHECK(back.values() == f.values());
  CHECK(h["role"] == "xi");
}

TEST_CASE("cyclic shift and reflection") {
  GridSpec g{1, 8, 16, 1.0, 1.0};
  GridField f = random_field(g, 10);
  GridField s = f.shifted({1, 3});
  SpaceTimePoint p{{2, 5}};
  CHECK(s.at(p.shifted(g, {1, 3})) == f.at(p));
  GridField r = f.reflected(1, 4);
  CHECK(r.at(SpaceTimePoint{{2, 3}}) == f.at(SpaceTimePoint{{2, 5}}));
  // heat solve commutes with shifts exactly up to roundoff
  CHECK((heat_solve(s) - heat_solve(f).shifted({1, 3})).max_abs() <= 1e-13);
}
