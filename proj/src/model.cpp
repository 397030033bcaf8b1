#include "mim/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "mim/combinatorics.hpp"

namespace mim {

namespace {

std::vector<int> zero_exponent(const GridSpec& g) { return std::vector<int>(static_cast<std::size_t>(g.dims()), 0); }

PolyField product_of(const std::vector<const PolyField*>& factors, const GridSpec& g, const SpaceTimePoint& base) {
  PolyField acc = PolyField::constant(g, base, 1.0);
  for (const PolyField* f : factors) {
    if (f->is_zero()) return PolyField(g, base);
    acc = acc * *f;
  }
  return acc;
}

// sum_i (factors with the i-th replaced by its variation)
PolyField leibniz(const std::vector<const PolyField*>& factors, const std::vector<const PolyField*>& deltas,
                  const GridSpec& g, const SpaceTimePoint& base) {
  PolyField acc(g, base);
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (deltas[i] == nullptr || deltas[i]->is_zero()) continue;
    std::vector<const PolyField*> f = factors;
    f[i] = deltas[i];
    acc += product_of(f, g, base);
  }
  return acc;
}

const PolyField& lookup(const std::map<MultiIndex, PolyField>& m, const MultiIndex& b, const char* what) {
  auto it = m.find(b);
  if (it == m.end())
    throw RecursionOrderError(fmt::format("{} of {} requested before it was built", what, b.to_string()));
  return it->second;
}

PolyField minus_constant(PolyField p, double c) {
  p.add_term(zero_exponent(p.spec()), GridField(p.spec(), 1.0), -c);
  return p;
}

double window_max(const PolyField& p, const SpaceTimePoint& center) {
  double m = 0.0;
  for (const auto& z : window_nodes(p.spec(), center, 2)) m = std::max(m, std::abs(p.eval(z)));
  return m;
}

std::vector<int> unit_exponent(int dims, int axis) {
  std::vector<int> e(static_cast<std::size_t>(dims), 0);
  e[static_cast<std::size_t>(axis)] = 1;
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------

double CounterTerm::value(const MultiIndex& beta) const {
  auto it = entries.find(beta);
  return it == entries.end() ? 0.0 : it->second.value;
}

RealSeries CounterTerm::series() const {
  RealSeries s;
  for (const auto& [b, e] : entries)
    if (e.value != 0.0) s.set(b, e.value);
  return s;
}

nlohmann::json CounterTerm::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [b, e] : entries)
    j[b.to_string()] = {{"value", e.value}, {"stderr", e.stderr_}, {"n_samples", e.n}, {"tau", tau}};
  return j;
}

CounterTerm CounterTerm::from_json(const nlohmann::json& j) {
  CounterTerm c;
  for (const auto& [k, v] : j.items()) {
    MultiIndex b = MultiIndex::parse(k);
    if (!b.is_coeff_only()) throw ConfigError(fmt::format("counterterm index {} has polynomial keys", k));
    c.entries[b] = Estimate{v.at("value").get<double>(), v.value("stderr", 0.0), v.value("n_samples", std::size_t{0})};
    c.tau = v.value("tau", c.tau);
  }
  return c;
}

// ---------------------------------------------------------------------------

ModelPlan::ModelPlan(UniversePtr universe, GridSpec grid, double tau, CounterTerm c)
    : universe_(std::move(universe)), grid_(grid), tau_(tau), c_(std::move(c)) {
  if (!(tau_ > 0.0)) throw DomainError("model needs a mollification scale tau > 0");
  if (universe_->params().d != grid_.d) throw ConfigError("universe and grid disagree on the dimension");
  for (const auto& [b, e] : c_.entries)
    if (!b.is_coeff_only()) throw DomainError("counterterm must live on coefficient-only indices");
  const IndexUniverse& U = *universe_;
  const RealSeries cs = c_.series();
  for (const auto& beta : U.indices()) {
    Entry e;
    e.beta = beta;
    e.position = U.position(beta);
    e.homogeneity = homogeneity(beta, U.params());
    e.polynomial = beta.is_purely_polynomial();
    e.coeff_only = beta.is_coeff_only();
    e.taylor_order = e.homogeneity;
    const double nearest = std::round(e.homogeneity);
    if (!e.polynomial && nearest > 0.0 && std::abs(e.homogeneity - nearest) < 1e-3) {
      e.resonant = true;
      e.taylor_order = nearest;
      warnings_.push_back(fmt::format("|{}| = {} is resonant; Taylor order rounded to {}", beta.to_string(),
                                      e.homogeneity, nearest));
    }
    if (!e.polynomial) {
      for (const auto& [key, exp] : beta.entries()) {
        if (!key.is_coeff()) continue;
        Decompositions dec = product_decompositions(beta, key.k(), U);
        missing_ += dec.missing;
        if (!dec.tuples.empty()) e.products.emplace_back(key.k(), std::move(dec.tuples));
      }
      int lmax = 0;
      for (const auto& [key, exp] : beta.entries())
        if (key.is_coeff()) lmax += key.k() * exp;
      RealSeries dl = cs;
      for (int l = 1; l <= lmax && !dl.empty(); ++l) {
        dl = dl.derive_D0();
        for (auto& rd : ladder_decompositions(beta, l, U)) {
          double w = dl.get(rd.remainder, 0.0) / factorial(l);
          if (w != 0.0) e.ladders.push_back({l, std::move(rd.factors), w});
        }
      }
      for (const auto& [k, tuples] : e.products)
        for (const auto& t : tuples)
          for (const auto& f : t)
            if (U.position(f) >= e.position)
              throw RecursionOrderError(fmt::format("factor {} of {} does not precede it", f.to_string(),
                                                    beta.to_string()));
      for (const auto& ld : e.ladders)
        for (const auto& f : ld.factors)
          if (U.position(f) >= e.position)
            throw RecursionOrderError(fmt::format("factor {} of {} does not precede it", f.to_string(),
                                                  beta.to_string()));
    }
    entries_.push_back(std::move(e));
  }
}

const ModelPlan::Entry& ModelPlan::entry(const MultiIndex& beta) const {
  if (!universe_->contains(beta)) throw DomainError(fmt::format("{} is not in the universe", beta.to_string()));
  return entries_[universe_->position(beta)];
}

const PolyField& ModelRun::component(const MultiIndex& beta) const { return lookup(pi, beta, "Pi"); }

PolyField build_rhs(const ModelRun& run, const MultiIndex& beta) {
  const ModelPlan& plan = *run.plan;
  const GridSpec& g = plan.grid();
  const auto& e = plan.entry(beta);
  if (e.polynomial) throw DomainError("purely polynomial indices have no right-hand side");
  PolyField acc(g, run.base);
  if (beta.is_zero()) acc += PolyField::periodic(run.xi_tau, run.base);
  for (const auto& [k, tuples] : e.products)
    for (const auto& t : tuples) {
      std::vector<const PolyField*> f;
      for (std::size_t i = 0; i + 1 < t.size(); ++i) f.push_back(&lookup(run.pi, t[i], "Pi"));
      f.push_back(&lookup(run.laplacian, t.back(), "Laplacian of Pi"));
      acc += product_of(f, g, run.base);
    }
  for (const auto& ld : e.ladders) {
    std::vector<const PolyField*> f;
    for (const auto& b : ld.factors) f.push_back(&lookup(run.pi, b, "Pi"));
    acc.axpy(-ld.weight, product_of(f, g, run.base));
  }
  return acc;
}

PolyField integrate_component(const ModelRun& run, const MultiIndex& beta, const PolyField& pi_minus) {
  const auto& e = run.plan->entry(beta);
  if (e.polynomial) return PolyField::monomial(run.plan->grid(), run.base, beta.single_key().n());
  return pi_minus.heat_solve().taylor_subtract(e.taylor_order).remainder;
}

ModelRun build_model(PlanPtr plan, const GridField& xi_tau, const SpaceTimePoint& base, Provenance provenance,
                     const std::optional<MultiIndex>& through) {
  const GridSpec& g = plan->grid();
  if (!(xi_tau.spec() == g)) throw DomainError("noise sample lives on a different grid");
  ModelRun run;
  run.plan = plan;
  run.base = base;
  run.xi_tau = xi_tau;
  run.provenance = std::move(provenance);
  run.provenance.tau = plan->tau();
  if (through) plan->entry(*through);
  for (const auto& e : plan->entries()) {
    const MultiIndex& beta = e.beta;
    if (e.polynomial) {
      PolyField p = PolyField::monomial(g, base, beta.single_key().n());
      run.laplacian[beta] = p.laplacian();
      run.pi[beta] = std::move(p);
      continue;
    }
    PolyField rhs = build_rhs(run, beta);
    if (e.coeff_only) {
      run.rhs_zero_mode[beta] = rhs.coeff(zero_exponent(g)).mean();
      run.rhs_at_base[beta] = rhs.eval(base);
      const double c = plan->counterterm().value(beta);
      if (c != 0.0) rhs = minus_constant(std::move(rhs), c);
    }
    auto taylor = rhs.heat_solve().taylor_subtract(e.taylor_order);
    run.taylor[beta] = std::move(taylor.derivatives);
    run.laplacian[beta] = taylor.remainder.laplacian();
    run.pi[beta] = std::move(taylor.remainder);
    run.pi_minus[beta] = std::move(rhs);
    if (through && beta == *through) break;
  }
  return run;
}

// ---------------------------------------------------------------------------

namespace {

// sum_gamma column(gamma)_beta * field(gamma), restricted to gammas in `fields`.
PolyField contract(const std::map<MultiIndex, RealSeries>& columns, const MultiIndex& beta,
                   const std::map<MultiIndex, PolyField>& fields, const GridSpec& g, const SpaceTimePoint& anchor) {
  PolyField acc(g, anchor);
  for (const auto& [gamma, col] : columns) {
    const double w = col.get(beta, 0.0);
    if (w == 0.0) continue;
    auto it = fields.find(gamma);
    if (it == fields.end()) continue;
    acc.axpy(w, it->second);
  }
  return acc;
}

std::vector<Key> poly_keys(const IndexUniverse& U) {
  std::vector<Key> keys;
  for (const auto& b : U.indices())
    for (const auto& [k, e] : b.entries())
      if (k.is_poly() && std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  return keys;
}

}  // namespace

RecenteringResult extract_recentering(const ModelRun& run_x, const ModelRun& run_y, double tolerance) {
  if (run_x.plan != run_y.plan && !(run_x.plan->grid() == run_y.plan->grid()))
    throw DomainError("recentering needs runs on the same grid");
  const ModelPlan& plan = *run_x.plan;
  const GridSpec& g = plan.grid();
  const UniversePtr& U = plan.universe();
  const SpaceTimePoint& y = run_y.base;

  RecenteringResult res;
  res.data.universe = U;
  res.data.base_values = RealSeries(U);
  for (const auto& beta : U->indices()) res.data.base_values.set(beta, run_x.component(beta).eval(y));
  for (const auto& k : poly_keys(*U)) res.data.pi_n.emplace(k, RealSeries(U));

  for (const auto& e : plan.entries()) {
    const MultiIndex& beta = e.beta;
    std::map<MultiIndex, RealSeries> columns;
    for (const auto& gamma : U->indices())
      if (U->position(gamma) <= e.position) columns.emplace(gamma, gamma_of_monomial(res.data, gamma));
    PolyField r = run_x.component(beta).reanchored(y);
    r = minus_constant(std::move(r), res.data.base_values.get(beta, 0.0));
    r -= contract(columns, beta, run_y.pi, g, y);
    const double order = e.polynomial ? e.homogeneity : e.taylor_order;
    for (const auto& n : exponents_below(g.d, order)) {
      if (parabolic_degree(n) == 0) continue;
      const double v = r.derivative_at(n, y) / factorial(n);
      if (v == 0.0) continue;
      Key key = Key::poly(n);
      res.data.pi_n.try_emplace(key, RealSeries(U));
      res.data.pi_n.at(key).set(beta, v);
      r.add_term(n, GridField(g, 1.0), -v);
    }
    const double resid = window_max(r, run_x.base);
    const double scale = window_max(run_x.component(beta), run_x.base);
    res.residual[beta] = resid;
    res.scale[beta] = scale;
    if (tolerance > 0.0 && resid > tolerance * std::max(scale, 1e-300))
      throw RecenteringError(fmt::format("recentering residual {:.3e} for {} exceeds {:.1e} x scale {:.3e}", resid,
                                         beta.to_string(), tolerance, scale));
  }
  return res;
}

std::map<MultiIndex, RecenterMinusEntry> verify_recenter_minus(const ModelRun& run_x, const ModelRun& run_y,
                                                               const GammaData& gamma, double t) {
  const ModelPlan& plan = *run_x.plan;
  const GridSpec& g = plan.grid();
  const SpaceTimePoint& y = run_y.base;
  std::map<MultiIndex, RealSeries> columns;
  for (const auto& c : plan.universe()->indices()) columns.emplace(c, gamma_of_monomial(gamma, c));
  std::map<MultiIndex, RecenterMinusEntry> out;
  for (const auto& [beta, pm] : run_x.pi_minus) {
    PolyField diff = pm.reanchored(y) - contract(columns, beta, run_y.pi_minus, g, y);
    RecenterMinusEntry r;
    r.scale = window_max(pm, run_x.base);
    r.window_max = window_max(diff, run_x.base);
    r.non_polynomial = diff.non_polynomial_norm();
    for (const auto& [m, q] : diff.terms())
      if (std::abs(q.mean()) > 1e-12 * std::max(1.0, r.scale)) r.polynomial_degree = std::max(r.polynomial_degree, parabolic_degree(m));
    r.smoothed_at_y = diff.is_zero() ? 0.0 : diff.smoothed(t).eval(y);
    out.emplace(beta, r);
  }
  return out;
}

// ---------------------------------------------------------------------------

const PolyField& DirectionalDerivativeRun::component(const MultiIndex& beta) const {
  return lookup(delta_pi, beta, "delta Pi");
}

DirectionalDerivativeRun build_directional_derivative(const ModelRun& run, const GridField& direction) {
  const ModelPlan& plan = *run.plan;
  const GridSpec& g = plan.grid();
  DirectionalDerivativeRun d;
  d.parent = &run;
  d.direction = direction;
  d.direction_tau = semigroup_convolve(direction, plan.tau());
  const PolyField zero(g, run.base);
  auto delta_of = [&](const std::map<MultiIndex, PolyField>& m, const MultiIndex& b) -> const PolyField* {
    if (plan.entry(b).polynomial) return &zero;
    return &lookup(m, b, "delta Pi");
  };
  for (const auto& e : plan.entries()) {
    const MultiIndex& beta = e.beta;
    if (e.polynomial) {
      d.delta_pi[beta] = zero;
      d.delta_laplacian[beta] = zero;
      continue;
    }
    if (e.homogeneity >= 2.0) continue;
    PolyField acc(g, run.base);
    if (beta.is_zero()) acc += PolyField::periodic(d.direction_tau, run.base);
    for (const auto& [k, tuples] : e.products)
      for (const auto& t : tuples) {
        std::vector<const PolyField*> f, df;
        for (std::size_t i = 0; i + 1 < t.size(); ++i) {
          f.push_back(&lookup(run.pi, t[i], "Pi"));
          df.push_back(delta_of(d.delta_pi, t[i]));
        }
        f.push_back(&lookup(run.laplacian, t.back(), "Laplacian of Pi"));
        df.push_back(delta_of(d.delta_laplacian, t.back()));
        acc += leibniz(f, df, g, run.base);
      }
    for (const auto& ld : e.ladders) {
      std::vector<const PolyField*> f, df;
      for (const auto& b : ld.factors) {
        f.push_back(&lookup(run.pi, b, "Pi"));
        df.push_back(delta_of(d.delta_pi, b));
      }
      acc.axpy(-ld.weight, leibniz(f, df, g, run.base));
    }
    PolyField dp = integrate_component(run, beta, acc);
    d.delta_laplacian[beta] = dp.laplacian();
    d.delta_pi[beta] = std::move(dp);
    d.delta_pi_minus[beta] = std::move(acc);
  }
  return d;
}

namespace {

bool singular(const ModelPlan& plan, const MultiIndex& b) { return plan.entry(b).homogeneity < 2.0; }

std::map<MultiIndex, RealSeries> dgamma_columns(const ModelPlan& plan, const GammaData& gamma,
                                                const DerivativeGammaData& dg) {
  std::map<MultiIndex, RealSeries> cols;
  for (const auto& c : plan.universe()->indices())
    if (singular(plan, c)) cols.emplace(c, dgamma_of_monomial(gamma, dg, c));
  return cols;
}

}  // namespace

DpiResult extract_dpi(const DirectionalDerivativeRun& drun_x, const ModelRun& run_y, const GammaData& gamma) {
  const ModelRun& run_x = *drun_x.parent;
  const ModelPlan& plan = *run_x.plan;
  const GridSpec& g = plan.grid();
  const UniversePtr& U = plan.universe();
  const SpaceTimePoint& y = run_y.base;
  DpiResult res;
  res.data.dpi0 = RealSeries(U);
  for (const auto& [beta, dp] : drun_x.delta_pi)
    if (!plan.entry(beta).polynomial) res.data.dpi0.set(beta, dp.eval(y));
  for (int a = 1; a < g.dims(); ++a) res.data.dpi_n.emplace(Key::poly(unit_exponent(g.dims(), a)), RealSeries(U));

  std::map<MultiIndex, PolyField> q_pi_y;
  for (const auto& [b, p] : run_y.pi)
    if (singular(plan, b)) q_pi_y.emplace(b, p);

  for (const auto& e : plan.entries()) {
    if (e.polynomial || e.homogeneity >= 2.0) continue;
    const MultiIndex& beta = e.beta;
    auto cols = dgamma_columns(plan, gamma, res.data);
    PolyField r = minus_constant(drun_x.component(beta).reanchored(y), res.data.dpi0.get(beta, 0.0));
    r -= contract(cols, beta, q_pi_y, g, y);
    for (int a = 1; a < g.dims(); ++a) {
      const auto n = unit_exponent(g.dims(), a);
      const double v = r.derivative_at(n, y);
      res.data.dpi_n.at(Key::poly(n)).set(beta, v);
      r.add_term(n, GridField(g, 1.0), -v);
    }
    res.modelledness.emplace(beta, std::move(r));
  }
  return res;
}

std::map<MultiIndex, PolyField> ho28_residual(const DirectionalDerivativeRun& drun_x, const ModelRun& run_y,
                                              const GammaData& gamma, const DerivativeGammaData& dgamma) {
  const ModelRun& run_x = *drun_x.parent;
  const ModelPlan& plan = *run_x.plan;
  const GridSpec& g = plan.grid();
  const SpaceTimePoint& y = run_y.base;
  auto cols = dgamma_columns(plan, gamma, dgamma);

  std::map<MultiIndex, PolyField> q_pi_y, q_pi_minus_y;
  for (const auto& [b, p] : run_y.pi)
    if (singular(plan, b)) q_pi_y.emplace(b, p);
  for (const auto& [b, p] : run_y.pi_minus)
    if (singular(plan, b)) q_pi_minus_y.emplace(b, p);

  // Laplacian of delta Pi_x - dGamma* Q Pi_y, per singular index
  std::map<MultiIndex, PolyField> lap_f;
  for (const auto& e : plan.entries()) {
    if (e.homogeneity >= 2.0) continue;
    PolyField f(g, y);
    auto it = drun_x.delta_pi.find(e.beta);
    if (it != drun_x.delta_pi.end() && !it->second.is_zero()) f += it->second.reanchored(y);
    f -= contract(cols, e.beta, q_pi_y, g, y);
    lap_f.emplace(e.beta, f.laplacian());
  }

  std::map<MultiIndex, PolyField> out;
  for (const auto& e : plan.entries()) {
    if (e.polynomial || e.homogeneity >= 2.0) continue;
    const MultiIndex& beta = e.beta;
    PolyField r = lookup(drun_x.delta_pi_minus, beta, "delta Pi minus").reanchored(y);
    r -= contract(cols, beta, q_pi_minus_y, g, y);
    for (const auto& [k, tuples] : e.products)
      for (const auto& t : tuples) {
        double w = 1.0;
        for (std::size_t i = 0; i + 1 < t.size(); ++i) w *= gamma.base_values.get(t[i], 0.0);
        if (w != 0.0) r.axpy(-w, lookup(lap_f, t.back(), "Laplacian of the modelled difference"));
      }
    if (beta.is_zero()) r -= PolyField::periodic(drun_x.direction_tau, y);
    out.emplace(beta, std::move(r));
  }
  return out;
}

std::map<MultiIndex, std::vector<double>> verify_ho28(const DirectionalDerivativeRun& drun_x, const ModelRun& run_y,
                                                      const GammaData& gamma, const DerivativeGammaData& dgamma,
                                                      const std::vector<double>& t_ladder) {
  std::map<MultiIndex, std::vector<double>> out;
  for (const auto& [beta, r] : ho28_residual(drun_x, run_y, gamma, dgamma)) {
    auto& v = out[beta];
    for (double t : t_ladder) v.push_back(r.is_zero() ? 0.0 : std::abs(r.smoothed(t).eval(run_y.base)));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string file_token(const MultiIndex& b) {
  std::string s;
  for (char ch : b.to_string()) {
    switch (ch) {
      case '^': s += 'p'; break;
      case '*': s += '_'; break;
      case '(': case ')': break;
      case ',': s += '-'; break;
      default: s += ch;
    }
  }
  return s;
}

}  // namespace

void write_model_dump(const ModelRun& run, const std::string& dir, const nlohmann::json& header) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  auto dump = [&](const std::string& role, const MultiIndex& b, const PolyField& p) {
    nlohmann::json h = header;
    h["role"] = role;
    h["beta"] = b.to_string();
    h["seed"] = run.provenance.seed;
    h["sample"] = run.provenance.sample;
    h["tau"] = run.provenance.tau;
    h["base_point"] = run.base.idx;
    const std::string name = role + "_" + file_token(b) + ".bin";
    std::ofstream os(fs::path(dir) / name, std::ios::binary);
    if (!os) throw ResourceError(fmt::format("cannot write {}", (fs::path(dir) / name).string()));
    p.sampled().write_binary(os, h);
    index.push_back({{"role", role}, {"beta", b.to_string()}, {"file", name}});
  };
  for (const auto& [b, p] : run.pi) dump("pi", b, p);
  for (const auto& [b, p] : run.pi_minus) dump("pi_minus", b, p);
  std::ofstream(fs::path(dir) / "counterterm.json") << run.plan->counterterm().to_json().dump(2) << '\n';
  std::ofstream(fs::path(dir) / "index.json") << index.dump(2) << '\n';
}

}  // namespace mim
