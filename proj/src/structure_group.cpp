#include "mim/structure_group.hpp"

#include <cmath>

#include <fmt/format.h>

namespace mim {

namespace {

constexpr double kHomEps = 1e-12;

RealSeries unit_series() { return RealSeries::monomial(MultiIndex(), 1.0); }

RealSeries prune(const RealSeries& s, const IndexUniverse& U) {
  return s.filtered([&](const MultiIndex& b) { return U.may_divide(b); });
}

// Gamma* z_k = sum_l binom(k+l, k) z_{k+l} Pi^l, cut once alpha(1+k+l) exceeds
// every homogeneity in the universe.
RealSeries gamma_zk(const GammaData& g, int k) {
  const IndexUniverse& U = *g.universe;
  const double a = U.params().alpha;
  double hmax = 0.0;
  for (const auto& b : U.indices()) hmax = std::max(hmax, homogeneity(b, U.params()));
  RealSeries out;
  RealSeries pi_pow = unit_series();
  for (int l = 0; a * (1 + k + l) <= hmax + kHomEps; ++l) {
    if (l > 0) pi_pow = pruned_product(pi_pow, g.base_values, U);
    RealSeries z = RealSeries::monomial(MultiIndex::e_k(k + l), binomial(k + l, k));
    out = out + pruned_product(z, pi_pow, U);
    if (pi_pow.empty()) break;
  }
  return out;
}

RealSeries gamma_zn(const GammaData& g, const Key& n) {
  RealSeries out = RealSeries::monomial(MultiIndex::unit(n), 1.0);
  auto it = g.pi_n.find(n);
  if (it != g.pi_n.end()) out = out + it->second;
  return prune(out, *g.universe);
}

}  // namespace

RealSeries pruned_product(const RealSeries& a, const RealSeries& b, const IndexUniverse& U) {
  RealSeries r;
  for (const auto& [b1, c1] : a.terms())
    for (const auto& [b2, c2] : b.terms()) {
      MultiIndex t = b1 + b2;
      if (U.may_divide(t)) r.add_to(t, c1 * c2);
    }
  return r;
}

void GammaData::check_restriction() const {
  const ModelParams& p = universe->params();
  for (const auto& [n, s] : pi_n)
    for (const auto& [b, v] : s.terms()) {
      if (v == 0.0) continue;
      if (!is_populated(b))
        throw DomainError(fmt::format("pi^({}) has unpopulated component {}", n.to_string(), b.to_string()));
      if (!(n.parabolic_degree() < homogeneity(b, p) - kHomEps))
        throw DomainError(fmt::format("pi^({}) violates |n| < |beta| at {}", n.to_string(), b.to_string()));
    }
}

// ---------------------------------------------------------------------------
// GammaMatrix

GammaMatrix GammaMatrix::identity(UniversePtr universe) {
  GammaMatrix m(universe);
  for (const auto& b : universe->indices()) m.entries_[{b, b}] = 1.0;
  return m;
}

double GammaMatrix::entry(const MultiIndex& beta, const MultiIndex& gamma) const {
  auto it = entries_.find({beta, gamma});
  return it == entries_.end() ? 0.0 : it->second;
}

void GammaMatrix::set(const MultiIndex& beta, const MultiIndex& gamma, double v) {
  if (v == 0.0) {
    entries_.erase({beta, gamma});
  } else {
    entries_[{beta, gamma}] = v;
  }
}

RealSeries GammaMatrix::apply(const RealSeries& s) const {
  RealSeries r(universe_);
  for (const auto& [bg, v] : entries_) {
    const double* c = s.find(bg.second);
    if (c) r.add_to(bg.first, v * *c);
  }
  return r;
}

RealSeries GammaMatrix::column(const MultiIndex& gamma) const {
  RealSeries r(universe_);
  for (const auto& [bg, v] : entries_)
    if (bg.second == gamma) r.add_to(bg.first, v);
  return r;
}

void GammaMatrix::write_csv(std::ostream& os) const {
  os << "beta,gamma,value\n";
  for (const auto& [bg, v] : entries_)
    os << bg.first.to_string() << ',' << bg.second.to_string() << ',' << fmt::format("{:.17g}", v) << '\n';
}

GammaMatrix compose(const GammaMatrix& a, const GammaMatrix& b) {
  GammaMatrix r(a.universe());
  std::map<MultiIndex, std::vector<std::pair<MultiIndex, double>>> rows_b;
  for (const auto& [dg, v] : b.entries()) rows_b[dg.first].emplace_back(dg.second, v);
  std::map<std::pair<MultiIndex, MultiIndex>, double> acc;
  for (const auto& [bd, va] : a.entries()) {
    auto it = rows_b.find(bd.second);
    if (it == rows_b.end()) continue;
    for (const auto& [gamma, vb] : it->second) acc[{bd.first, gamma}] += va * vb;
  }
  for (const auto& [bg, v] : acc) r.set(bg.first, bg.second, v);
  return r;
}

double max_abs_diff(const GammaMatrix& a, const GammaMatrix& b) {
  double m = 0.0;
  for (const auto& [bg, v] : a.entries()) m = std::max(m, std::abs(v - b.entry(bg.first, bg.second)));
  for (const auto& [bg, v] : b.entries())
    if (!a.entries().count(bg)) m = std::max(m, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------
// Construction

RealSeries gamma_of_monomial(const GammaData& g, const MultiIndex& gamma) {
  const IndexUniverse& U = *g.universe;
  RealSeries out = unit_series();
  for (const auto& [key, e] : gamma.entries()) {
    RealSeries gen = key.is_coeff() ? gamma_zk(g, key.k()) : gamma_zn(g, key);
    for (int i = 0; i < e; ++i) out = pruned_product(out, gen, U);
  }
  return out;
}

RealSeries gamma_apply(const GammaData& g, const RealSeries& s) {
  RealSeries out;
  for (const auto& [b, c] : s.terms()) out = out + gamma_of_monomial(g, b).scaled(c);
  return out;
}

GammaMatrix build_gamma(const GammaData& g) {
  if (!g.universe) throw DomainError("GammaData without universe");
  GammaMatrix m(g.universe);
  for (const auto& gamma : g.universe->indices()) {
    RealSeries col = gamma_of_monomial(g, gamma);
    if (col.truncation_loss() != 0)
      throw TruncationError("truncation loss while building Gamma* column " + gamma.to_string());
    for (const auto& [b, v] : col.terms())
      if (g.universe->contains(b)) m.set(b, gamma, v);
  }
  return m;
}

RealSeries dgamma_of_monomial(const GammaData& g, const DerivativeGammaData& dg, const MultiIndex& gamma) {
  const IndexUniverse& U = *g.universe;
  RealSeries z = RealSeries::monomial(gamma, 1.0);
  RealSeries out;
  auto add_term = [&](const RealSeries& dpi, const RealSeries& dz) {
    if (dpi.empty() || dz.empty()) return;
    out = out + pruned_product(dpi, gamma_apply(g, dz), U);
  };
  add_term(dg.dpi0, z.derive_D0());
  for (const auto& [n, dpi] : dg.dpi_n) add_term(dpi, z.derive_Dn(n));
  return out;
}

RealSeries dgamma_apply(const GammaData& g, const DerivativeGammaData& dg, const RealSeries& s) {
  RealSeries out;
  for (const auto& [b, c] : s.terms()) out = out + dgamma_of_monomial(g, dg, b).scaled(c);
  return out;
}

GammaMatrix build_dgamma(const GammaData& g, const DerivativeGammaData& dg) {
  GammaMatrix m(g.universe);
  for (const auto& gamma : g.universe->indices()) {
    RealSeries col = dgamma_of_monomial(g, dg, gamma);
    for (const auto& [b, v] : col.terms())
      if (g.universe->contains(b)) m.set(b, gamma, v);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json series_to_json(const RealSeries& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [b, v] : s.terms()) arr.push_back({{"index", b.to_string()}, {"value", v}});
  return arr;
}

RealSeries series_from_json(const nlohmann::json& j, UniversePtr universe) {
  RealSeries s(std::move(universe));
  for (const auto& e : j) s.add_to(MultiIndex::parse(e.at("index").get<std::string>()), e.at("value").get<double>());
  return s;
}

nlohmann::json gamma_data_to_json(const GammaData& g) {
  nlohmann::json j;
  j["base_values"] = series_to_json(g.base_values);
  nlohmann::json pis = nlohmann::json::object();
  for (const auto& [n, s] : g.pi_n) pis[n.to_string()] = series_to_json(s);
  j["pi_n"] = pis;
  return j;
}

}  // namespace mim
