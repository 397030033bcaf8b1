#include "mim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include <fmt/format.h>

#include "mim/io.hpp"
#include "mim/spectral.hpp"

namespace mim {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError(fmt::format("unknown {} field '{}'", where, k));
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}.{}: {}", where, key, e.what()));
  }
}

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

nlohmann::json provenance_json(const RunConfig& c, const std::string& command) {
  return {{"command", command}, {"ensemble", c.ensemble.name()}, {"seed", c.mc.seed}};
}

double rel(double v, double scale) { return std::abs(v) / (1.0 + std::abs(scale)); }

std::string fmt_z(double z) { return fmt::format("{:.3f}", z); }

// Window-wide maximum of |a|.
double window_max(const PolyField& a, const SpaceTimePoint& c) { return a.max_abs_window(c); }

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  params.validate();
  ordering.validate();
  grid.validate();
  ensemble.validate();
  ensemble_b.validate();
  if (params.d != grid.d) throw ConfigError(fmt::format("params.d = {} but grid.d = {}", params.d, grid.d));
  if (grid.size() > max_grid_points)
    throw ResourceError(fmt::format("grid has {} points, limit {}", grid.size(), max_grid_points));
  mc.validate(grid);
  // every rung must resolve at least one spatial cell: tau^(1/4) >= h1
  for (double t : mc.taus(grid))
    if (std::pow(t, 0.25) < grid.h(1) * (1 - 1e-12))
      throw ConfigError(fmt::format("tau = {} is below the grid resolution h1^4 = {}", t, std::pow(grid.h(1), 4)));
  const auto ladder = mc.taus(grid);
  const int n = static_cast<int>(ladder.size());
  if (tau_index >= n || tau_index < -n) throw ConfigError(fmt::format("tau_index {} outside the ladder", tau_index));
  if (static_cast<int>(build_offset.size()) != grid.dims())
    throw ConfigError(fmt::format("build_offset needs {} entries", grid.dims()));
  ProbeSet::spatial(grid, {cauchy_r()});
  for (double t : {slope_tol_zero, slope_tol_k1, slope_tol_gamma, divergence_tol, z_tol})
    if (!(t > 0)) throw ConfigError("tolerances must be positive");
  // the polynomial part of every index must be resolvable by spectral derivatives
  int max_deg = 0;
  for (const auto& b : enumerate_populated(params, ordering, max_indices))
    max_deg = std::max(max_deg, static_cast<int>(std::ceil(homogeneity(b, params))));
  if (grid.N1 < 8 * (max_deg + 1))
    throw ConfigError(fmt::format("N1 = {} too coarse for homogeneity cutoff {}", grid.N1, params.homogeneity_cutoff));
}

double RunConfig::tau() const {
  const auto ladder = mc.taus(grid);
  const int n = static_cast<int>(ladder.size());
  return ladder[static_cast<std::size_t>(tau_index < 0 ? n + tau_index : tau_index)];
}

std::string RunConfig::calibration_path() const {
  return calibration.empty() ? (fs::path(out) / "counterterm.json").string() : calibration;
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"params",
           {{"alpha", c.params.alpha},
            {"d", c.params.d},
            {"homogeneity_cutoff", c.params.homogeneity_cutoff},
            {"ordinal_cutoff", c.params.ordinal_cutoff}}},
          {"ordering", {{"lambda1", c.ordering.lambda1}, {"lambda2", c.ordering.lambda2}}},
          {"grid", to_json(c.grid)},
          {"ensemble", to_json(c.ensemble)},
          {"ensemble_b", to_json(c.ensemble_b)},
          {"mc", to_json(c.mc)},
          {"out", c.out},
          {"calibration", c.calibration},
          {"options",
           {{"build_sample", c.build_sample},
            {"build_offset", c.build_offset},
            {"tau_index", c.tau_index},
            {"cauchy_radius", c.cauchy_radius},
            {"slope_tol_zero", c.slope_tol_zero},
            {"slope_tol_k1", c.slope_tol_k1},
            {"slope_tol_gamma", c.slope_tol_gamma},
            {"divergence_tol", c.divergence_tol},
            {"z_tol", c.z_tol}}},
          {"limits", {{"max_grid_points", c.max_grid_points}, {"max_indices", c.max_indices}}}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  reject_unknown(j, {"params", "ordering", "grid", "ensemble", "ensemble_b", "mc", "out", "calibration", "options",
                     "limits"},
                 "config");
  if (j.contains("params")) {
    const auto& p = j.at("params");
    reject_unknown(p, {"alpha", "d", "homogeneity_cutoff", "ordinal_cutoff"}, "params");
    read(p, "alpha", c.params.alpha, "params");
    read(p, "d", c.params.d, "params");
    read(p, "homogeneity_cutoff", c.params.homogeneity_cutoff, "params");
    read(p, "ordinal_cutoff", c.params.ordinal_cutoff, "params");
  }
  if (j.contains("ordering")) {
    const auto& o = j.at("ordering");
    reject_unknown(o, {"lambda1", "lambda2"}, "ordering");
    read(o, "lambda1", c.ordering.lambda1, "ordering");
    read(o, "lambda2", c.ordering.lambda2, "ordering");
  }
  if (j.contains("grid")) {
    reject_unknown(j.at("grid"), {"d", "N0", "N1", "L0", "L"}, "grid");
    try {
      c.grid = grid_from_json(j.at("grid"));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("grid: {}", e.what()));
    }
  }
  if (j.contains("ensemble")) c.ensemble = ensemble_from_json(j.at("ensemble"));
  if (j.contains("ensemble_b")) c.ensemble_b = ensemble_from_json(j.at("ensemble_b"));
  if (j.contains("mc")) c.mc = mc_from_json(j.at("mc"));
  read(j, "out", c.out, "config");
  read(j, "calibration", c.calibration, "config");
  if (j.contains("options")) {
    const auto& o = j.at("options");
    reject_unknown(o, {"build_sample", "build_offset", "tau_index", "cauchy_radius", "slope_tol_zero", "slope_tol_k1",
                       "slope_tol_gamma", "divergence_tol", "z_tol"},
                   "options");
    read(o, "build_sample", c.build_sample, "options");
    read(o, "build_offset", c.build_offset, "options");
    read(o, "tau_index", c.tau_index, "options");
    read(o, "cauchy_radius", c.cauchy_radius, "options");
    read(o, "slope_tol_zero", c.slope_tol_zero, "options");
    read(o, "slope_tol_k1", c.slope_tol_k1, "options");
    read(o, "slope_tol_gamma", c.slope_tol_gamma, "options");
    read(o, "divergence_tol", c.divergence_tol, "options");
    read(o, "z_tol", c.z_tol, "options");
  }
  if (j.contains("limits")) {
    const auto& l = j.at("limits");
    reject_unknown(l, {"max_grid_points", "max_indices"}, "limits");
    read(l, "max_grid_points", c.max_grid_points, "limits");
    read(l, "max_indices", c.max_indices, "limits");
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path), nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Checks

void CommandResult::add(std::string name, bool hard, bool passed, std::string detail) {
  checks.push_back({std::move(name), hard, passed, std::move(detail)});
}

bool CommandResult::hard_ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return !c.hard || c.passed; });
}

bool CommandResult::soft_ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.hard || c.passed; });
}

void write_checks(const std::string& dir, const CommandResult& r) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : r.checks)
    a.push_back({{"name", c.name}, {"kind", c.hard ? "hard" : "soft"}, {"passed", c.passed}, {"detail", c.detail}});
  write_text((fs::path(dir) / "checks.json").string(), a.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Calibration files

nlohmann::json ladder_to_json(const CalibratedLadder& l, const EnsembleSpec& e, const GridSpec& g) {
  nlohmann::json rungs = nlohmann::json::array();
  for (const auto& c : l.counterterms) rungs.push_back(c.to_json());
  return {{"ensemble", to_json(e)}, {"grid", to_json(g)}, {"taus", l.taus}, {"counterterms", rungs}};
}

CalibratedLadder ladder_from_json(const nlohmann::json& j, const EnsembleSpec& e, const GridSpec& g) {
  try {
    if (ensemble_from_json(j.at("ensemble")).name() != e.name())
      throw ConfigError(fmt::format("calibration is for ensemble {}, config asks for {}",
                                    ensemble_from_json(j.at("ensemble")).name(), e.name()));
    if (!(grid_from_json(j.at("grid")) == g)) throw ConfigError("calibration was made on a different grid");
    CalibratedLadder l;
    l.taus = j.at("taus").get<std::vector<double>>();
    for (const auto& c : j.at("counterterms")) l.counterterms.push_back(CounterTerm::from_json(c));
    if (l.taus.size() != l.counterterms.size()) throw ConfigError("calibration: taus and counterterms differ in length");
    return l;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(fmt::format("malformed calibration: {}", ex.what()));
  }
}

CounterTerm load_counterterm(const RunConfig& c) {
  const std::string path = c.calibration_path();
  if (!fs::exists(path))
    throw ConfigError(fmt::format("no calibration at {}; run the calibrate subcommand first (or set \"calibration\")",
                                  path));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  CalibratedLadder l = ladder_from_json(j, c.ensemble, c.grid);
  const double tau = c.tau();
  for (std::size_t i = 0; i < l.taus.size(); ++i)
    if (std::abs(l.taus[i] - tau) <= 1e-12 * tau) return l.counterterms[i];
  throw ConfigError(fmt::format("calibration at {} has no rung tau = {}; rerun calibrate", path, tau));
}

// ---------------------------------------------------------------------------
// enumerate

CommandResult cmd_enumerate(const RunConfig& c) {
  CommandResult r;
  auto idx = enumerate_populated(c.params, c.ordering, c.max_indices);
  CsvWriter w(path_in(c, "enumerate.csv"),
              {"beta", "homogeneity", "noise_homogeneity", "ordinal", "populated", "purely_polynomial"});
  std::printf("%-24s %10s %6s %10s %s\n", "beta", "|beta|", "[beta]", "ordinal", "populated");
  bool sorted = true;
  double prev = -1e300;
  for (const auto& b : idx) {
    const double h = homogeneity(b, c.params), o = ordinal(b, c.ordering);
    std::printf("%-24s %10.4f %6d %10.4f %s\n", b.to_string().c_str(), h, noise_homogeneity(b), o,
                is_populated(b) ? "yes" : "no");
    w.cell(b.to_string()).cell(h).cell(noise_homogeneity(b)).cell(o);
    w.cell(std::string(is_populated(b) ? "1" : "0")).cell(std::string(b.is_purely_polynomial() ? "1" : "0"));
    w.end_row();
    sorted = sorted && o >= prev;
    prev = o;
  }
  w.close();
  r.add("rows sorted by ordinal", true, sorted);
  r.add("every row populated and below the cutoffs", true,
        std::all_of(idx.begin(), idx.end(), [&](const MultiIndex& b) {
          return is_populated(b) && homogeneity(b, c.params) < c.params.homogeneity_cutoff &&
                 ordinal(b, c.ordering) < c.params.ordinal_cutoff;
        }),
        fmt::format("{} rows", idx.size()));
  return r;
}

// ---------------------------------------------------------------------------
// calibrate

CommandResult cmd_calibrate(const RunConfig& c) {
  CommandResult r;
  auto U = make_universe(c.params, c.ordering, c.max_indices);
  CalibratedLadder l = calibrate_ladder(U, c.grid, c.ensemble, c.mc);
  write_text(path_in(c, "counterterm.json"), ladder_to_json(l, c.ensemble, c.grid).dump(2) + "\n");
  write_counterterms_csv(path_in(c, "counterterms.csv"), l);
  bool zero = true;
  for (const auto& ct : l.counterterms) zero = zero && ct.value(MultiIndex::zero()) == 0.0;
  r.add("c_0 = 0 at every rung", true, zero);
  bool finite = true;
  for (const auto& ct : l.counterterms)
    for (const auto& [b, e] : ct.entries) finite = finite && std::isfinite(e.value) && std::isfinite(e.stderr_);
  r.add("counterterms finite", true, finite);
  return r;
}

// ---------------------------------------------------------------------------
// build

CommandResult cmd_build(const RunConfig& c) {
  CommandResult r;
  CounterTerm ct = load_counterterm(c);
  auto U = make_universe(c.params, c.ordering, c.max_indices);
  const double tau = c.tau();
  auto plan = std::make_shared<ModelPlan>(U, c.grid, tau, ct);
  GridField xi = sample_noise(c.ensemble, c.grid, c.mc.seed, c.build_sample);
  GridField xi_tau = mollify(xi, tau);
  const SpaceTimePoint x = SpaceTimePoint::center(c.grid);
  const SpaceTimePoint y = x.shifted(c.grid, c.build_offset);
  Provenance prov{c.ensemble.name(), c.mc.seed, c.build_sample, tau};
  ModelRun rx = build_model(plan, xi_tau, x, prov);
  ModelRun ry = build_model(plan, xi_tau, y, prov);

  nlohmann::json header = provenance_json(c, "build");
  header["tau"] = tau;
  header["sample"] = c.build_sample;
  write_model_dump(rx, path_in(c, "model"), header);

  auto rec = extract_recentering(rx, ry, 0.0);
  auto minus = verify_recenter_minus(rx, ry, rec.data, tau);
  const GridField expect = xi_tau - GridField(c.grid, xi_tau.mean());
  const double anchoring =
      (rx.pi.at(MultiIndex::zero()).heat_operator().coeff(std::vector<int>(c.grid.dims(), 0)) - expect).max_abs() /
      expect.max_abs();

  nlohmann::json rows = nlohmann::json::array();
  double worst_vanish = 0, worst_rec = 0, worst_minus = 0;
  bool degrees_ok = true;
  for (const auto& b : U->indices()) {
    const PolyField& p = rx.pi.at(b);
    const double scale = window_max(p, x);
    const double vanish = rel(p.eval(x), scale);
    const double rres = rec.residual.count(b) ? rec.residual.at(b) : 0.0;
    const double recr = rec.residual.count(b) ? rel(rres, rec.scale.at(b)) : 0.0;
    const RecenterMinusEntry m = minus.count(b) ? minus.at(b) : RecenterMinusEntry{};
    const double mr = rel(m.non_polynomial, m.scale);
    const double h = homogeneity(b, c.params);
    degrees_ok = degrees_ok && m.polynomial_degree <= std::max(-1.0, std::floor(h - 2));
    worst_vanish = std::max(worst_vanish, vanish);
    worst_rec = std::max(worst_rec, recr);
    worst_minus = std::max(worst_minus, mr);
    rows.push_back({{"beta", b.to_string()},
                    {"homogeneity", h},
                    {"scale", scale},
                    {"value_at_base", p.eval(x)},
                    {"recentering_residual", rres},
                    {"recenter_minus_window_max", m.window_max},
                    {"recenter_minus_non_polynomial", m.non_polynomial},
                    {"recenter_minus_polynomial_degree", m.polynomial_degree}});
  }
  nlohmann::json rep{{"tau", tau},
                     {"sample", c.build_sample},
                     {"base", x.idx},
                     {"second_base", y.idx},
                     {"anchoring_relative", anchoring},
                     {"truncation_missing", plan->truncation_missing()},
                     {"components", rows}};
  write_text(path_in(c, "report.json"), rep.dump(2) + "\n");

  r.add("anchoring (d0 - Lap) Pi_0 = xi_tau - mean", true, anchoring <= 1e-10, fmt::format("{:.3g}", anchoring));
  r.add("Pi_x(x) = 0", true, worst_vanish <= 1e-6, fmt::format("{:.3g}", worst_vanish));
  r.add("recentering residual", true, worst_rec <= 1e-9, fmt::format("{:.3g}", worst_rec));
  r.add("Pi^- recentering: polynomial remainder", true, worst_minus <= 1e-9 && degrees_ok,
        fmt::format("{:.3g}", worst_minus));
  r.add("no truncation loss", true, plan->truncation_missing() == 0);
  return r;
}

// ---------------------------------------------------------------------------
// mc

namespace {

// (e_n, e_m) with m < n componentwise, plus (e_{k=1}, e_{k=0}).
std::vector<std::pair<MultiIndex, MultiIndex>> gamma_entries(const IndexUniverse& U) {
  std::vector<std::pair<MultiIndex, MultiIndex>> out;
  for (const auto& b : U.indices()) {
    if (!b.is_purely_polynomial()) continue;
    for (const auto& g : U.indices()) {
      if (!g.is_purely_polynomial() || g == b) continue;
      const auto& n = b.single_key().n();
      const auto& m = g.single_key().n();
      bool below = true;
      for (std::size_t a = 0; a < n.size(); ++a) below = below && m[a] <= n[a];
      if (below) out.emplace_back(b, g);
    }
  }
  if (U.contains(MultiIndex::e_k(1)) && U.contains(MultiIndex::e_k(0)))
    out.emplace_back(MultiIndex::e_k(1), MultiIndex::e_k(0));
  return out;
}

CounterTerm counterterm_or_calibrate(const RunConfig& c, const UniversePtr& U, nlohmann::json& extra) {
  if (fs::exists(c.calibration_path())) {
    extra["calibration"] = c.calibration_path();
    return load_counterterm(c);
  }
  extra["calibration"] = "inline";
  return calibrate_counterterm(U, c.grid, c.ensemble, c.tau(), c.mc);
}

}  // namespace

CommandResult cmd_mc(const RunConfig& c) {
  CommandResult r;
  auto U = make_universe(c.params, c.ordering, c.max_indices);
  nlohmann::json extra;
  CounterTerm ct = counterterm_or_calibrate(c, U, extra);
  auto plan = std::make_shared<ModelPlan>(U, c.grid, c.tau(), ct);
  const ProbeSet probes = ProbeSet::spatial(c.grid, c.mc.radii(c.grid));
  auto vals = collect_probe_values(plan, c.ensemble, probes, c.mc);

  std::vector<MomentRow> moments;
  std::vector<std::pair<std::string, ExponentFit>> fits;
  for (const auto& b : U->indices()) {
    auto s = estimate_scaling(vals, probes, b, c.mc.p);
    moments.insert(moments.end(), s.moments.begin(), s.moments.end());
    fits.emplace_back(b.to_string(), s.fit);
    const double target = homogeneity(b, c.params);
    const double err = std::abs(s.fit.slope - target);
    const std::string detail = fmt::format("slope {:.4f} +- {:.4f}, target {:.4f}", s.fit.slope, s.fit.stderr_, target);
    if (b.is_purely_polynomial())
      r.add("slope " + b.to_string(), true, err <= 1e-8, detail);
    else if (b == MultiIndex::zero())
      r.add("slope 0", false, err <= c.slope_tol_zero, detail);
    else if (b == MultiIndex::e_k(1))
      r.add("slope k1", false, err <= c.slope_tol_k1, detail);
  }

  const auto entries = gamma_entries(*U);
  if (!entries.empty() && c.mc.gamma_samples >= 2) {
    MCConfig gmc = c.mc;
    gmc.n_samples = c.mc.gamma_samples;
    auto gv = collect_gamma_values(plan, c.ensemble, probes, entries, gmc);
    for (const auto& e : entries) {
      auto s = estimate_gamma_scaling(gv, probes, e, c.mc.p);
      moments.insert(moments.end(), s.moments.begin(), s.moments.end());
      const std::string name = e.first.to_string() + "|" + e.second.to_string();
      fits.emplace_back(name, s.fit);
      const double target = homogeneity(e.first, c.params) - homogeneity(e.second, c.params);
      const double err = std::abs(s.fit.slope - target);
      const std::string detail =
          fmt::format("slope {:.4f} +- {:.4f}, target {:.4f}", s.fit.slope, s.fit.stderr_, target);
      if (e.first.is_purely_polynomial())
        r.add("Gamma slope " + name, true, err <= 1e-8, detail);
      else
        r.add("Gamma slope " + name, false, err <= c.slope_tol_gamma, detail);
    }
  }
  write_moments_csv(path_in(c, "moments.csv"), moments);
  write_exponents_csv(path_in(c, "exponents.csv"), fits);
  return r;
}

// ---------------------------------------------------------------------------
// converge

PeriodDoubling period_doubling_bias(const RunConfig& c, double tau) {
  const MultiIndex k1 = MultiIndex::e_k(1);
  ModelParams p = c.params;
  p.homogeneity_cutoff = homogeneity(k1, p) + 1e-9;
  p.ordinal_cutoff = ordinal(k1, c.ordering) + 1e-9;
  auto U = make_universe(p, c.ordering, c.max_indices);
  GridSpec big = c.grid;
  big.N1 *= 2;
  big.L *= 2;
  big.N0 *= 4;
  big.L0 *= 4;
  if (big.size() > c.max_grid_points) throw ResourceError("period doubling exceeds max_grid_points");
  PeriodDoubling pd;
  pd.base = calibrate_counterterm(U, c.grid, c.ensemble, tau, c.mc).entries.at(k1);
  pd.doubled = calibrate_counterterm(U, big, c.ensemble, tau, c.mc).entries.at(k1);
  pd.z = (pd.doubled.value - pd.base.value) /
         std::sqrt(pd.base.stderr_ * pd.base.stderr_ + pd.doubled.stderr_ * pd.doubled.stderr_);
  return pd;
}

CommandResult cmd_converge(const RunConfig& c) {
  CommandResult r;
  auto U = make_universe(c.params, c.ordering, c.max_indices);
  CalibratedLadder l = calibrate_ladder(U, c.grid, c.ensemble, c.mc);
  write_text(path_in(c, "counterterm.json"), ladder_to_json(l, c.ensemble, c.grid).dump(2) + "\n");
  write_counterterms_csv(path_in(c, "counterterms.csv"), l);

  std::vector<std::pair<std::string, ExponentFit>> div;
  for (const auto& b : U->indices()) {
    if (!b.is_coeff_only() || b.is_zero()) continue;
    bool nonzero = true;
    for (const auto& ct : l.counterterms) nonzero = nonzero && ct.value(b) != 0.0;
    if (!nonzero) continue;
    auto fit = counterterm_divergence(l, b);
    div.emplace_back(b.to_string(), fit);
    if (b == MultiIndex::e_k(1)) {
      const double target = homogeneity(b, c.params) - 2;
      r.add("counterterm divergence k1", false, std::abs(fit.slope - target) <= c.divergence_tol,
            fmt::format("exponent {:.4f} +- {:.4f}, target {:.4f}", fit.slope, fit.stderr_, target));
    }
  }
  write_exponents_csv(path_in(c, "counterterm_exponents.csv"), div);

  CauchyReport rep = cauchy_study(U, c.grid, c.ensemble, l, c.mc, c.cauchy_r());
  write_cauchy_csv(path_in(c, "cauchy.csv"), rep);
  std::vector<std::pair<std::string, ExponentFit>> decay;
  for (const auto& [b, f] : rep.decay) decay.emplace_back(b.to_string(), f);
  write_exponents_csv(path_in(c, "cauchy_exponents.csv"), decay);

  std::map<MultiIndex, std::vector<double>> dist;
  for (const auto& row : rep.rows) dist[row.beta].push_back(row.distance.value);
  bool shape = true;
  for (const auto& [b, v] : dist) shape = shape && v.size() + 1 == l.taus.size();
  r.add("one Cauchy row per (beta, adjacent rung pair)", true, shape && !dist.empty(),
        fmt::format("{} rows", rep.rows.size()));
  for (const auto& [b, v] : dist) {
    std::string seq;
    bool dec = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      seq += (i ? " " : "") + fmt::format("{:.4g}", v[i]);
      if (i) dec = dec && v[i] < v[i - 1];
    }
    r.add("Cauchy distances decrease " + b.to_string(), false, dec, seq);
    const auto& f = rep.decay.at(b);
    r.add("Cauchy decay exponent > 0 " + b.to_string(), false, f.slope > 2 * f.stderr_,
          fmt::format("{:.3f} +- {:.3f}", f.slope, f.stderr_));
  }

  PeriodDoubling pd = period_doubling_bias(c, l.taus.back());
  write_text(path_in(c, "finite_volume.json"),
             nlohmann::json{{"tau", l.taus.back()},
                            {"c_k1", {{"value", pd.base.value}, {"stderr", pd.base.stderr_}, {"n", pd.base.n}}},
                            {"c_k1_doubled_periods",
                             {{"value", pd.doubled.value}, {"stderr", pd.doubled.stderr_}, {"n", pd.doubled.n}}},
                            {"z", pd.z}}
                     .dump(2) +
                 "\n");
  r.add("finite-volume bias of c_k1 under period doubling", false, std::abs(pd.z) <= c.z_tol,
        fmt::format("{:.6g} vs {:.6g}, z = {}", pd.base.value, pd.doubled.value, fmt_z(pd.z)));
  return r;
}

// ---------------------------------------------------------------------------
// universality

CommandResult cmd_universality(const RunConfig& c) {
  CommandResult r;
  auto U = make_universe(c.params, c.ordering, c.max_indices);
  CalibratedLadder la = calibrate_ladder(U, c.grid, c.ensemble, c.mc);
  CalibratedLadder lb = calibrate_ladder(U, c.grid, c.ensemble_b, c.mc);
  write_counterterms_csv(path_in(c, "counterterms_a.csv"), la);
  write_counterterms_csv(path_in(c, "counterterms_b.csv"), lb);
  UniversalityReport rep = universality_study(U, c.grid, c.ensemble, c.ensemble_b, la, lb, c.mc);
  write_universality_csv(path_in(c, "universality.csv"), rep);

  const double smallest = la.taus.back();
  double worst = 0;
  for (const auto& row : rep.rows)
    if (row.beta.is_zero() && row.tau == smallest) worst = std::max(worst, std::abs(row.std_diff));
  r.add("beta = 0 moment profiles agree at the smallest tau", false, worst <= c.z_tol,
        fmt::format("max |z| = {}", fmt_z(worst)));
  if (rep.aggregate.count(MultiIndex::e_k(1))) {
    const auto& v = rep.aggregate.at(MultiIndex::e_k(1));
    bool shrink = true;
    std::string seq;
    for (std::size_t i = 0; i < v.size(); ++i) {
      seq += (i ? " " : "") + fmt_z(v[i]);
      if (i) shrink = shrink && v[i - 1] < v[i];
    }
    r.add("k1 standardized difference shrinks with tau / h^4", false, shrink, "largest tau first: " + seq);
  }

  auto sga = spectral_gap_diagnostic(c.ensemble, c.grid, c.mc);
  auto sgb = spectral_gap_diagnostic(c.ensemble_b, c.grid, c.mc);
  std::vector<SgRow> all = sga;
  all.insert(all.end(), sgb.begin(), sgb.end());
  write_sg_csv(path_in(c, "sg.csv"), all);
  double lo = 1e300, hi = 0;
  for (std::size_t i = 0; i < sga.size() && i < sgb.size(); ++i) {
    const double q = sgb[i].ratio / sga[i].ratio;
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  r.add("spectral gap ratios within a factor 4 across ensembles", false, lo >= 0.25 && hi <= 4.0,
        fmt::format("ratio b/a in [{:.3f}, {:.3f}]", lo, hi));
  return r;
}

// ---------------------------------------------------------------------------
// verify

namespace {

RealSeries restricted(const RealSeries& s, const IndexUniverse& U) {
  RealSeries out;
  for (const auto& [b, v] : s.terms())
    if (U.contains(b)) out = out + RealSeries::monomial(b, v);
  return out;
}

GridField smooth_direction(const GridSpec& g) {
  GridField d(g);
  std::vector<int> idx(g.dims(), 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::size_t rest = i;
    for (int a = g.dims() - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rest % g.extent(a));
      rest /= g.extent(a);
    }
    double v = std::cos(2 * M_PI * idx[0] / g.N0);
    for (int a = 1; a < g.dims(); ++a) v *= std::sin(2 * M_PI * idx[a] / g.N1);
    d[i] = v + 0.5 * std::sin(4 * M_PI * idx[1] / g.N1);
  }
  return d;
}

}  // namespace

CommandResult cmd_verify(const RunConfig& c) {
  CommandResult r;
  auto U = make_universe(c.params, c.ordering, c.max_indices);
  const GridSpec& g = c.grid;
  const double tau = c.tau();
  CounterTerm ct;
  std::string ct_note = "zero counterterm";
  if (fs::exists(c.calibration_path())) {
    ct = load_counterterm(c);
    ct_note = "calibrated counterterm";
  }
  auto plan = std::make_shared<ModelPlan>(U, g, tau, ct);
  r.add("no truncation loss", true, plan->truncation_missing() == 0, ct_note);

  GridField xi = sample_noise(c.ensemble, g, c.mc.seed, c.build_sample);
  GridField xi_tau = mollify(xi, tau);
  const SpaceTimePoint x = SpaceTimePoint::center(g);
  const SpaceTimePoint y = x.shifted(g, c.build_offset);
  std::vector<int> back(c.build_offset.size());
  for (std::size_t a = 0; a < back.size(); ++a) back[a] = -2 * c.build_offset[a] + (a == 0 ? 1 : 0);
  const SpaceTimePoint z = x.shifted(g, back);
  ModelRun rx = build_model(plan, xi_tau, x), ry = build_model(plan, xi_tau, y), rz = build_model(plan, xi_tau, z);

  // model defining properties
  const GridField expect = xi_tau - GridField(g, xi_tau.mean());
  const double anchoring =
      (rx.pi.at(MultiIndex::zero()).heat_operator().coeff(std::vector<int>(g.dims(), 0)) - expect).max_abs() /
      expect.max_abs();
  r.add("anchoring", true, anchoring <= 1e-10, fmt::format("{:.3g}", anchoring));
  double vanish = 0;
  for (const auto& [b, p] : rx.pi) vanish = std::max(vanish, rel(p.eval(x), window_max(p, x)));
  r.add("Pi_x(x) = 0", true, vanish <= 1e-6, fmt::format("{:.3g}", vanish));

  auto rxy = extract_recentering(rx, ry, 0.0), ryz = extract_recentering(ry, rz, 0.0),
       rxz = extract_recentering(rx, rz, 0.0);
  double rec = 0;
  for (const auto& [b, v] : rxy.residual) rec = std::max(rec, rel(v, rxy.scale.at(b)));
  r.add("recentering Pi_x = Pi_x(y) + Gamma*_xy Pi_y", true, rec <= 1e-9, fmt::format("{:.3g}", rec));

  auto minus = verify_recenter_minus(rx, ry, rxy.data, tau);
  double mres = 0;
  bool deg = true;
  for (const auto& [b, m] : minus) {
    mres = std::max(mres, rel(m.non_polynomial, m.scale));
    deg = deg && m.polynomial_degree <= std::max(-1.0, std::floor(homogeneity(b, c.params) - 2));
  }
  r.add("recentering of Pi^-", true, mres <= 1e-9 && deg, fmt::format("{:.3g}", mres));

  // algebraic structure of Gamma*
  GammaMatrix Gxy = build_gamma(rxy.data), Gyz = build_gamma(ryz.data), Gxz = build_gamma(rxz.data);
  double gscale = 0;
  for (const auto& [k, v] : Gxz.entries()) gscale = std::max(gscale, std::abs(v));
  const double comp = max_abs_diff(compose(Gxy, Gyz), Gxz);
  r.add("Gamma*_xy Gamma*_yz = Gamma*_xz", true, comp <= 1e-9 * (1 + gscale), fmt::format("{:.3g}", comp));
  bool tri_hom = true, tri_prec = true;
  for (const auto& [bg, v] : Gxy.entries()) {
    if (bg.first == bg.second) {
      tri_hom = tri_hom && v == 1.0;
      continue;
    }
    if (v == 0.0) continue;
    tri_hom = tri_hom && homogeneity(bg.second, c.params) < homogeneity(bg.first, c.params);
    tri_prec = tri_prec && ordinal(bg.second, c.ordering) < ordinal(bg.first, c.ordering);
  }
  r.add("Gamma* triangular in homogeneity", true, tri_hom);
  r.add("Gamma* triangular in the ordinal", true, tri_prec);
  double mult = 0;
  const auto& idx = U->indices();
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i; j < idx.size(); ++j) {
      RealSeries lhs = restricted(gamma_of_monomial(rxy.data, idx[i] + idx[j]), *U);
      RealSeries rhs = restricted(
          pruned_product(gamma_of_monomial(rxy.data, idx[i]), gamma_of_monomial(rxy.data, idx[j]), *U), *U);
      mult = std::max(mult, max_abs_diff(lhs, rhs) / (1 + max_abs(lhs)));
    }
  r.add("Gamma* multiplicative", true, mult <= 1e-10, fmt::format("{:.3g}", mult));

  // shift covariance: translating the sample equals moving the base point
  const std::vector<int> one(g.dims(), 1);
  std::vector<int> minus_one(g.dims(), -1);
  ModelRun shifted = build_model(plan, mollify(xi.shifted(one), tau), x.shifted(g, one));
  ModelRun moved = build_model(plan, xi_tau, x);
  double sdiff = 0, sscale = 0;
  for (const auto& b : idx) {
    for (const auto& w : window_nodes(g, x, 4)) {
      const double a = shifted.pi.at(b).eval(w.shifted(g, one)), m = moved.pi.at(b).eval(w);
      sdiff = std::max(sdiff, std::abs(a - m));
      sscale = std::max(sscale, std::abs(m));
    }
  }
  r.add("cyclic shift covariance", true, sdiff <= 1e-10 * (1 + sscale), fmt::format("{:.3g}", sdiff));

  // Malliavin derivative against finite differences on the first two ordinal levels
  GridField dir = smooth_direction(g);
  auto d = build_directional_derivative(rx, dir);
  const double h = 1e-4;
  ModelRun rh = build_model(plan, mollify(xi + h * dir, tau), x);
  std::vector<double> levels;
  for (const auto& b : idx) levels.push_back(ordinal(b, c.ordering));
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const double top = levels.size() > 1 ? levels[1] : levels[0];
  double fd = 0;
  for (const auto& [b, dp] : d.delta_pi) {
    if (b.is_purely_polynomial() || ordinal(b, c.ordering) > top) continue;
    PolyField diff = (1.0 / h) * (rh.pi.at(b) - rx.pi.at(b));
    diff -= dp;
    fd = std::max(fd, window_max(diff, x) / window_max(dp, x));
  }
  r.add("delta Pi against finite differences", true, fd <= 1e-3, fmt::format("{:.3g}", fd));
  auto dpi = extract_dpi(d, ry, rxy.data);
  double mod = 0;
  for (const auto& [b, m] : dpi.modelledness) mod = std::max(mod, rel(m.eval(y), window_max(m, x)));
  r.add("modelledness vanishes at y", true, mod <= 1e-9, fmt::format("{:.3g}", mod));
  auto res = ho28_residual(d, ry, rxy.data, dpi.data);
  double ho = 0;
  for (const auto& [b, f] : res) ho = std::max(ho, rel(f.eval(y), window_max(f, x)));
  r.add("Pi^- derivative identity vanishes at y", true, ho <= 1e-9, fmt::format("{:.3g}", ho));
  return r;
}

}  // namespace mim
