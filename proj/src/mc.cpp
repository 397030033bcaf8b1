#include "mim/mc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "mim/errors.hpp"

namespace mim {

double reference_time(const GridSpec& g) { return 64.0 * std::pow(g.h(1), 4); }

std::vector<double> default_tau_ladder(const GridSpec& g) {
  std::vector<double> t;
  for (int k = 2; k <= 6; ++k) t.push_back(reference_time(g) * std::ldexp(1.0, -k));
  return t;
}

std::vector<double> default_probe_radii(const GridSpec& g) {
  std::vector<double> r;
  for (int m = g.N1 / 16; m <= g.N1 / 4; m *= 2) r.push_back(m * g.h(1));
  return r;
}

std::vector<double> MCConfig::taus(const GridSpec& g) const {
  return tau_ladder.empty() ? default_tau_ladder(g) : tau_ladder;
}

std::vector<double> MCConfig::radii(const GridSpec& g) const {
  return probe_radii.empty() ? default_probe_radii(g) : probe_radii;
}

void MCConfig::validate(const GridSpec& g) const {
  if (n_samples < 2) throw ConfigError("mc.n_samples must be at least 2");
  if (calibration_samples == 1) throw ConfigError("mc.calibration_samples must be 0 or at least 2");
  if (p < 1) throw ConfigError("mc.p must be a positive integer");
  if (workers < 1) throw ConfigError("mc.workers must be at least 1");
  for (double t : taus(g))
    if (!(t > 0.0)) throw ConfigError(fmt::format("tau ladder entry {} is not positive", t));
  auto t = taus(g);
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] < t[i - 1])) throw ConfigError("tau ladder must be strictly decreasing");
  ProbeSet::spatial(g, radii(g));
}

nlohmann::json to_json(const MCConfig& c) {
  return {{"n_samples", c.n_samples},
          {"p", c.p},
          {"seed", c.seed},
          {"tau_ladder", c.tau_ladder},
          {"probe_radii", c.probe_radii},
          {"kappa", c.kappa},
          {"epsilon", c.epsilon},
          {"q_prime", c.q_prime},
          {"calibration_samples", c.calibration_samples},
          {"gamma_samples", c.gamma_samples},
          {"estimator", c.estimator == CounterTermEstimator::zero_mode ? "zero_mode" : "base_point"},
          {"workers", c.workers}};
}

MCConfig mc_from_json(const nlohmann::json& j) {
  MCConfig c;
  static const std::set<std::string> known{"n_samples", "p", "seed", "tau_ladder", "probe_radii",
                                           "kappa", "epsilon", "q_prime", "calibration_samples",
                                           "gamma_samples", "estimator", "workers"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError(fmt::format("unknown mc field '{}'", k));
  try {
    if (j.contains("n_samples")) c.n_samples = j.at("n_samples").get<std::size_t>();
    if (j.contains("p")) c.p = j.at("p").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("tau_ladder")) c.tau_ladder = j.at("tau_ladder").get<std::vector<double>>();
    if (j.contains("probe_radii")) c.probe_radii = j.at("probe_radii").get<std::vector<double>>();
    if (j.contains("kappa")) c.kappa = j.at("kappa").get<double>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("q_prime")) c.q_prime = j.at("q_prime").get<double>();
    if (j.contains("calibration_samples")) c.calibration_samples = j.at("calibration_samples").get<std::size_t>();
    if (j.contains("gamma_samples")) c.gamma_samples = j.at("gamma_samples").get<std::size_t>();
    if (j.contains("workers")) c.workers = j.at("workers").get<unsigned>();
    if (j.contains("estimator")) {
      auto s = j.at("estimator").get<std::string>();
      if (s == "zero_mode") c.estimator = CounterTermEstimator::zero_mode;
      else if (s == "base_point") c.estimator = CounterTermEstimator::base_point;
      else throw ConfigError(fmt::format("unknown counterterm estimator '{}'", s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("mc section: {}", e.what()));
  }
  return c;
}

// ---------------------------------------------------------------------------

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

Estimate mean_estimate(const std::vector<double>& v) {
  Estimate e;
  e.n = v.size();
  if (v.empty()) return e;
  e.value = pairwise_sum(v) / v.size();
  if (v.size() > 1) {
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - e.value) * (v[i] - e.value);
    e.stderr_ = std::sqrt(pairwise_sum(sq) / (v.size() - 1) / v.size());
  }
  return e;
}

Estimate root_moment(const std::vector<double>& s, int p) {
  Estimate m = mean_estimate(s);
  Estimate r;
  r.n = m.n;
  if (m.value <= 0.0) return r;
  r.value = std::pow(m.value, 1.0 / p);
  r.stderr_ = m.stderr_ / (p * std::pow(m.value, 1.0 - 1.0 / p));
  return r;
}

ExponentFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DomainError("fit_loglog: size mismatch");
  std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < 3) throw DomainError("fit_loglog needs at least 3 distinct abscissae");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw DomainError(fmt::format("fit_loglog: non-positive value at ({}, {})", x[i], y[i]));
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = lx.size();
  double mx = pairwise_sum(lx) / n, my = pairwise_sum(ly) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  ExponentFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = std::max(0.0, syy - f.slope * sxy);
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  f.stderr_ = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  f.radii = x;
  return f;
}

double jackknife_stderr(std::size_t n, const std::function<double(const std::vector<std::size_t>&)>& stat,
                        std::size_t blocks) {
  blocks = std::min(blocks, n);
  if (blocks < 2) return 0.0;
  std::vector<double> theta;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t lo = b * n / blocks, hi = (b + 1) * n / blocks;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
      if (i < lo || i >= hi) keep.push_back(i);
    theta.push_back(stat(keep));
  }
  double m = pairwise_sum(theta) / blocks, s = 0.0;
  for (double t : theta) s += (t - m) * (t - m);
  return std::sqrt(s * (blocks - 1) / blocks);
}

// ---------------------------------------------------------------------------

GridField mollified_sample(const EnsembleSpec& e, const GridSpec& g, double tau, std::uint64_t seed,
                           std::uint64_t sample_id) {
  return mollify(sample_noise(e, g, seed, sample_id), tau);
}

CounterTerm calibrate_counterterm(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& e, double tau,
                                  const MCConfig& mc) {
  CounterTerm c;
  c.tau = tau;
  const std::size_t n = mc.n_calibration();
  if (n < 2) throw InsufficientDataError("counterterm calibration needs at least 2 samples");
  for (const auto& beta : U->indices()) {
    if (beta.is_purely_polynomial() || !beta.is_coeff_only()) continue;
    if (beta == MultiIndex::zero()) {
      c.entries[beta] = Estimate{0.0, 0.0, n};
      continue;
    }
    auto plan = std::make_shared<ModelPlan>(U, g, tau, c);
    auto stats = parallel_map(n, mc.workers, [&](std::size_t i) {
      const std::uint64_t id = kCalibrationIdOffset + i;
      GridField xi = mollified_sample(e, g, tau, mc.seed, id);
      ModelRun run = build_model(plan, xi, SpaceTimePoint::center(g), {e.name(), mc.seed, id, tau}, beta);
      return mc.estimator == CounterTermEstimator::zero_mode ? run.rhs_zero_mode.at(beta) : run.rhs_at_base.at(beta);
    });
    c.entries[beta] = mean_estimate(stats);
  }
  return c;
}

ProbeSet ProbeSet::spatial(const GridSpec& g, const std::vector<double>& radii) {
  ProbeSet p;
  const double h = g.h(1);
  for (double r : radii) {
    const double m = r / h;
    const int mi = static_cast<int>(std::lround(m));
    if (std::abs(m - mi) > 1e-9 * std::max(1.0, m) || mi < 1)
      throw ConfigError(fmt::format("probe radius {} is not a positive multiple of the spatial cell {}", r, h));
    if (mi > g.N1 / 4) throw ConfigError(fmt::format("probe radius {} leaves the measurement window", r));
    if (!p.radii.empty() && !(r > p.radii.back())) throw ConfigError("probe radii must be increasing");
    p.radii.push_back(r);
    std::vector<std::vector<int>> offs;
    for (int a = 1; a <= g.d; ++a)
      for (int s : {1, -1}) {
        std::vector<int> o(g.dims(), 0);
        o[a] = s * mi;
        offs.push_back(o);
      }
    p.offsets.push_back(std::move(offs));
  }
  return p;
}

std::size_t ProbeSet::points() const {
  std::size_t n = 0;
  for (const auto& o : offsets) n += o.size();
  return n;
}

ProbeValues probe_values(const ModelRun& run, const ProbeSet& probes) {
  ProbeValues out;
  const GridSpec& g = run.plan->grid();
  for (const auto& [beta, pi] : run.pi) {
    auto& v = out[beta];
    v.reserve(probes.points());
    for (const auto& offs : probes.offsets)
      for (const auto& o : offs) v.push_back(pi.eval(run.base.shifted(g, o)));
  }
  return out;
}

std::vector<ProbeValues> collect_probe_values(const PlanPtr& plan, const EnsembleSpec& e, const ProbeSet& probes,
                                              const MCConfig& mc, std::uint64_t id_offset) {
  const GridSpec& g = plan->grid();
  return parallel_map(mc.n_samples, mc.workers, [&](std::size_t i) {
    const std::uint64_t id = id_offset + i;
    GridField xi = mollified_sample(e, g, plan->tau(), mc.seed, id);
    return probe_values(build_model(plan, xi, SpaceTimePoint::center(g), {e.name(), mc.seed, id, plan->tau()}),
                        probes);
  });
}

namespace {

template <class Map, class Key>
std::vector<double> radial_stat(const std::vector<Map>& samples, const ProbeSet& probes, const Key& key,
                                std::size_t r, int p) {
  std::size_t first = 0;
  for (std::size_t k = 0; k < r; ++k) first += probes.offsets[k].size();
  const std::size_t cnt = probes.offsets[r].size();
  std::vector<double> s;
  s.reserve(samples.size());
  for (const auto& m : samples) {
    const auto& v = m.at(key);
    double acc = 0.0;
    for (std::size_t j = 0; j < cnt; ++j) acc += std::pow(std::abs(v[first + j]), p);
    s.push_back(acc / cnt);
  }
  return s;
}

template <class Map, class Key>
ScalingEstimate scaling(const std::vector<Map>& samples, const ProbeSet& probes, const Key& key,
                        const std::string& label, int p) {
  ScalingEstimate out;
  std::vector<std::vector<double>> stats;
  std::vector<double> est;
  for (std::size_t r = 0; r < probes.radii.size(); ++r) {
    stats.push_back(radial_stat(samples, probes, key, r, p));
    Estimate m = root_moment(stats.back(), p);
    out.moments.push_back({label, probes.radii[r], p, m});
    est.push_back(m.value);
  }
  out.fit = fit_loglog(probes.radii, est);
  out.fit.stderr_ = jackknife_stderr(samples.size(), [&](const std::vector<std::size_t>& keep) {
    std::vector<double> y;
    for (const auto& s : stats) {
      std::vector<double> sub;
      for (auto i : keep) sub.push_back(s[i]);
      y.push_back(root_moment(sub, p).value);
    }
    return fit_loglog(probes.radii, y).slope;
  });
  return out;
}

}  // namespace

std::vector<double> radial_statistic(const std::vector<ProbeValues>& samples, const ProbeSet& probes,
                                     const MultiIndex& beta, std::size_t radius_index, int p) {
  return radial_stat(samples, probes, beta, radius_index, p);
}

ScalingEstimate estimate_scaling(const std::vector<ProbeValues>& samples, const ProbeSet& probes,
                                 const MultiIndex& beta, int p) {
  return scaling(samples, probes, beta, beta.to_string(), p);
}

std::vector<GammaProbeValues> collect_gamma_values(const PlanPtr& plan, const EnsembleSpec& e,
                                                   const ProbeSet& probes,
                                                   const std::vector<std::pair<MultiIndex, MultiIndex>>& entries,
                                                   const MCConfig& mc) {
  const GridSpec& g = plan->grid();
  const SpaceTimePoint x = SpaceTimePoint::center(g);
  return parallel_map(mc.gamma_samples, mc.workers, [&](std::size_t i) {
    GridField xi = mollified_sample(e, g, plan->tau(), mc.seed, i);
    Provenance prov{e.name(), mc.seed, i, plan->tau()};
    ModelRun rx = build_model(plan, xi, x, prov);
    GammaProbeValues out;
    for (const auto& offs : probes.offsets)
      for (const auto& o : offs) {
        ModelRun ry = build_model(plan, xi, x.shifted(g, o), prov);
        GammaMatrix G = build_gamma(extract_recentering(rx, ry).data);
        for (const auto& en : entries) out[en].push_back(G.entry(en.first, en.second));
      }
    return out;
  });
}

ScalingEstimate estimate_gamma_scaling(const std::vector<GammaProbeValues>& samples, const ProbeSet& probes,
                                       const std::pair<MultiIndex, MultiIndex>& entry, int p) {
  return scaling(samples, probes, entry, entry.first.to_string() + "|" + entry.second.to_string(), p);
}

}  // namespace mim
