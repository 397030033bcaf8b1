#include "mim/studies.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mim/errors.hpp"
#include "mim/spectral.hpp"

namespace mim {

CalibratedLadder calibrate_ladder(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& e, const MCConfig& mc) {
  CalibratedLadder l;
  l.taus = mc.taus(g);
  for (double tau : l.taus) l.counterterms.push_back(calibrate_counterterm(U, g, e, tau, mc));
  return l;
}

ExponentFit counterterm_divergence(const CalibratedLadder& ladder, const MultiIndex& beta) {
  std::vector<double> x, y;
  for (std::size_t j = 0; j < ladder.taus.size(); ++j) {
    x.push_back(std::pow(ladder.taus[j], 0.25));
    y.push_back(std::abs(ladder.counterterms[j].value(beta)));
  }
  return fit_loglog(x, y);
}

namespace {

std::vector<PlanPtr> ladder_plans(const UniversePtr& U, const GridSpec& g, const CalibratedLadder& l) {
  std::vector<PlanPtr> plans;
  for (std::size_t j = 0; j < l.taus.size(); ++j)
    plans.push_back(std::make_shared<ModelPlan>(U, g, l.taus[j], l.counterterms[j]));
  return plans;
}

bool singular(const MultiIndex& b, const ModelParams& p) {
  return !b.is_purely_polynomial() && homogeneity(b, p) < 2.0;
}

// mean over the given probe points of |v|^p r^(-p w)
double weighted_stat(const std::vector<double>& v, const ProbeSet& probes, int p, double w) {
  double acc = 0.0;
  std::size_t k = 0, n = 0;
  for (std::size_t r = 0; r < probes.radii.size(); ++r)
    for (std::size_t j = 0; j < probes.offsets[r].size(); ++j, ++k, ++n)
      acc += std::pow(std::abs(v[k]) * std::pow(probes.radii[r], -w), p);
  return acc / n;
}

double z_score(const Estimate& a, const Estimate& b) {
  double se = std::hypot(a.stderr_, b.stderr_);
  if (se == 0.0) return a.value == b.value ? 0.0 : std::copysign(INFINITY, a.value - b.value);
  return (a.value - b.value) / se;
}

double z_score(const Estimate& d) {
  if (d.stderr_ == 0.0) return d.value == 0.0 ? 0.0 : std::copysign(INFINITY, d.value);
  return d.value / d.stderr_;
}

}  // namespace

CauchyReport cauchy_study(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& e,
                          const CalibratedLadder& ladder, const MCConfig& mc, double radius) {
  if (ladder.taus.size() < 3) throw DomainError("cauchy_study needs at least 3 rungs");
  CauchyReport rep;
  rep.radius = radius;
  const ProbeSet probes = ProbeSet::spatial(g, {radius});
  const auto plans = ladder_plans(U, g, ladder);
  const SpaceTimePoint x = SpaceTimePoint::center(g);
  auto samples = parallel_map(mc.n_samples, mc.workers, [&](std::size_t i) {
    GridField xi = sample_noise(e, g, mc.seed, i);
    std::vector<ProbeValues> per_rung;
    for (const auto& plan : plans)
      per_rung.push_back(
          probe_values(build_model(plan, mollify(xi, plan->tau()), x, {e.name(), mc.seed, i, plan->tau()}), probes));
    return per_rung;
  });
  const std::size_t J = ladder.taus.size();
  for (const auto& beta : U->indices()) {
    if (!singular(beta, U->params())) continue;
    // stats[j][i]: mean over directions of |Pi^(j) - Pi^(j+1)|^p
    std::vector<std::vector<double>> stats(J - 1);
    for (std::size_t j = 0; j + 1 < J; ++j)
      for (const auto& s : samples) {
        const auto& a = s[j].at(beta);
        const auto& b = s[j + 1].at(beta);
        double acc = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) acc += std::pow(std::abs(a[k] - b[k]), mc.p);
        stats[j].push_back(acc / a.size());
      }
    std::vector<double> xs, ys;
    for (std::size_t j = 0; j + 1 < J; ++j) {
      Estimate d = root_moment(stats[j], mc.p);
      rep.rows.push_back({beta, ladder.taus[j], ladder.taus[j + 1], d});
      xs.push_back(std::pow(ladder.taus[j] - ladder.taus[j + 1], 0.25));
      ys.push_back(d.value);
    }
    if (xs.size() < 3) continue;
    ExponentFit fit = fit_loglog(xs, ys);
    fit.stderr_ = jackknife_stderr(mc.n_samples, [&](const std::vector<std::size_t>& keep) {
      std::vector<double> y;
      for (const auto& s : stats) {
        std::vector<double> sub;
        for (auto i : keep) sub.push_back(s[i]);
        y.push_back(root_moment(sub, mc.p).value);
      }
      return fit_loglog(xs, y).slope;
    });
    rep.decay[beta] = fit;
  }
  return rep;
}

UniversalityReport universality_study(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& a,
                                      const EnsembleSpec& b, const CalibratedLadder& ladder_a,
                                      const CalibratedLadder& ladder_b, const MCConfig& mc) {
  if (ladder_a.taus != ladder_b.taus) throw DomainError("universality_study: ladders differ");
  UniversalityReport rep{a.name(), b.name(), {}, {}};
  const ProbeSet probes = ProbeSet::spatial(g, mc.radii(g));
  const auto plans_a = ladder_plans(U, g, ladder_a);
  const auto plans_b = ladder_plans(U, g, ladder_b);
  const ModelParams& params = U->params();
  for (std::size_t j = 0; j < ladder_a.taus.size(); ++j) {
    auto va = collect_probe_values(plans_a[j], a, probes, mc);
    auto vb = collect_probe_values(plans_b[j], b, probes, mc);
    for (const auto& beta : U->indices()) {
      if (beta.is_purely_polynomial()) continue;
      const double hom = homogeneity(beta, params);
      // per radius
      std::size_t first = 0;
      double triple = 0.0;
      for (std::size_t r = 0; r < probes.radii.size(); ++r) {
        auto sa = radial_statistic(va, probes, beta, r, mc.p);
        auto sb = radial_statistic(vb, probes, beta, r, mc.p);
        UniversalityRow row{beta, ladder_a.taus[j], probes.radii[r], root_moment(sa, mc.p), root_moment(sb, mc.p)};
        row.std_diff = z_score(row.moment_a, row.moment_b);
        for (std::size_t k = 0; k < probes.offsets[r].size(); ++k) {
          std::vector<double> d;
          for (std::size_t i = 0; i < va.size(); ++i)
            d.push_back(std::pow(std::abs(va[i].at(beta)[first + k] - vb[i].at(beta)[first + k]), mc.p));
          triple = std::max(triple, root_moment(d, mc.p).value * std::pow(probes.radii[r], mc.kappa - hom));
        }
        first += probes.offsets[r].size();
        rep.rows.push_back(row);
      }
      std::vector<double> sa, sb;
      for (const auto& s : va) sa.push_back(weighted_stat(s.at(beta), probes, mc.p, hom));
      for (const auto& s : vb) sb.push_back(weighted_stat(s.at(beta), probes, mc.p, hom));
      UniversalityRow agg{beta, ladder_a.taus[j], 0.0, root_moment(sa, mc.p), root_moment(sb, mc.p)};
      agg.std_diff = z_score(agg.moment_a, agg.moment_b);
      agg.triple_norm = triple;
      for (auto& row : rep.rows)
        if (row.beta == beta && row.tau == ladder_a.taus[j]) row.triple_norm = triple;
      rep.rows.push_back(agg);
      rep.aggregate[beta].push_back(std::abs(agg.std_diff));
    }
  }
  return rep;
}

int reflection_parity(const MultiIndex& beta) {
  int odd = 0;
  for (const auto& [key, mult] : beta.entries())
    if (key.is_poly()) {
      int s = 0;
      const auto& n = key.n();
      for (std::size_t a = 1; a < n.size(); ++a) s += n[a];
      odd += (s % 2) * mult;
    }
  return odd % 2 ? -1 : 1;
}

CovarianceReport covariance_tests(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& e, double tau,
                                  const MCConfig& mc, bool rescale) {
  CovarianceReport rep;
  const SpaceTimePoint x = SpaceTimePoint::center(g);
  auto plan = std::make_shared<ModelPlan>(U, g, tau, calibrate_counterterm(U, g, e, tau, mc));

  // shift: moving the sample by z and the base point by z are the same model
  GridField xi = sample_noise(e, g, mc.seed, 0);
  ModelRun moved = build_model(plan, mollify(xi, tau), x);
  for (const std::vector<int>& z : {std::vector<int>(g.dims(), 1), std::vector<int>{3, 5}}) {
    if (static_cast<int>(z.size()) != g.dims()) continue;
    std::vector<int> minus(z.size());
    for (std::size_t a = 0; a < z.size(); ++a) minus[a] = -z[a];
    ModelRun shifted = build_model(plan, mollify(xi.shifted(minus), tau), x);
    ModelRun base = build_model(plan, mollify(xi, tau), x.shifted(g, z));
    for (const auto& [beta, p] : shifted.pi)
      for (const auto& w : window_nodes(g, x, 2)) {
        rep.shift_max_diff = std::max(rep.shift_max_diff, std::abs(p.eval(w) - base.pi.at(beta).eval(w.shifted(g, z))));
        rep.shift_scale = std::max(rep.shift_scale, std::abs(p.eval(w)));
      }
  }

  // reflection about x: Pi_{x beta}(x + r e_a) against sigma Pi_{x beta}(x - r e_a)
  const ProbeSet probes = ProbeSet::spatial(g, mc.radii(g));
  auto vals = collect_probe_values(plan, e, probes, mc);
  const ModelParams& params = U->params();
  for (const auto& beta : U->indices()) {
    const int sigma = reflection_parity(beta);
    const double hom = homogeneity(beta, params);
    std::vector<double> d;
    for (const auto& s : vals) {
      const auto& v = s.at(beta);
      double acc = 0.0;
      std::size_t k = 0, n = 0;
      for (std::size_t r = 0; r < probes.radii.size(); ++r)
        for (std::size_t j = 0; j + 1 < probes.offsets[r].size(); j += 2, k += 2, ++n)
          acc += (v[k] - sigma * v[k + 1]) * std::pow(probes.radii[r], -hom);
      d.push_back(acc / n);
    }
    rep.reflection_z[beta] = z_score(mean_estimate(d));
  }

  // parabolic rescaling (t, x) -> (s^2 t, s x) of the grid; white noise only
  if (rescale && e.kind == NoiseKind::gaussian_white) {
    const double s = rep.rescale_s;
    GridSpec gs = g;
    gs.L = s * g.L;
    gs.L0 = s * s * g.L0;
    const double taus = std::pow(s, 4) * tau;
    MCConfig mcs = mc;
    mcs.seed = mc.seed + 1;
    auto plan_s = std::make_shared<ModelPlan>(U, gs, taus, calibrate_counterterm(U, gs, e, taus, mcs));
    std::vector<double> radii_s;
    for (double r : probes.radii) radii_s.push_back(s * r);
    const ProbeSet probes_s = ProbeSet::spatial(gs, radii_s);
    auto vals_s = collect_probe_values(plan_s, e, probes_s, mcs);
    // white noise scales exactly with alpha = 2 - D/2
    ModelParams pw = params;
    pw.alpha = 2.0 - (g.d + 2) / 2.0;
    for (const auto& beta : U->indices()) {
      const double hom = homogeneity(beta, pw);
      std::vector<double> a, b;
      for (const auto& v : vals) a.push_back(weighted_stat(v.at(beta), probes, 2, hom));
      for (const auto& v : vals_s) b.push_back(weighted_stat(v.at(beta), probes_s, 2, hom));
      rep.rescale_z[beta] = z_score(mean_estimate(a), mean_estimate(b));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

double dual_norm_sq(const GridField& f, const EnsembleSpec& e) {
  Spectrum sp = forward(f);
  const int d = f.spec().d;
  long double acc = 0.0;
  for_each_mode(sp.spec, [&](const Mode& m) {
    double w = e.kind == NoiseKind::gaussian_fractional ? envelope_power(e, d, m.freq[0], m.k2()) : 1.0;
    acc += m.weight * w * std::norm(sp.c[m.flat]);
  });
  return static_cast<double>(acc) * f.spec().cell_volume() / static_cast<double>(f.size());
}

std::vector<SgRow> spectral_gap_diagnostic(const EnsembleSpec& e, const GridSpec& g, const MCConfig& mc) {
  const double t0 = reference_time(g);
  const double V = g.cell_volume();
  const SpaceTimePoint c = SpaceTimePoint::center(g);
  auto bump = [&](double t) {
    GridField k = kernel(g, t, std::vector<int>(g.dims(), 0));
    std::vector<int> to(c.idx.begin(), c.idx.end());
    return k.shifted(to);
  };
  GridField wave(g);
  for (int i = 0; i < g.N0; ++i)
    for (int j = 0; j < g.N1; ++j) {
      std::vector<int> idx(g.dims(), 0);
      idx[0] = i;
      idx[1] = j;
      wave[wave.flat(SpaceTimePoint{idx})] =
          std::cos(2 * M_PI * j / g.N1) * (1.0 + std::cos(2 * M_PI * i / g.N0));
    }

  struct Functional {
    std::string name;
    GridField phi;
    double t;  // 0: linear, otherwise V sum phi (xi_t)^2
  };
  const std::vector<Functional> battery{{"linear_bump_16t0", bump(16 * t0), 0.0},
                                        {"linear_bump_t0", bump(t0), 0.0},
                                        {"linear_wave", wave, 0.0},
                                        {"square_t0/4", bump(16 * t0), t0 / 4},
                                        {"square_t0", bump(16 * t0), t0}};

  std::vector<double> lin_dir;
  for (const auto& f : battery) lin_dir.push_back(dual_norm_sq(f.phi, e));

  // per sample: (F, ||dF||_*^2) for every functional
  auto samples = parallel_map(mc.n_samples, mc.workers, [&](std::size_t i) {
    GridField xi = sample_noise(e, g, mc.seed, i);
    std::vector<std::pair<double, double>> out;
    for (std::size_t q = 0; q < battery.size(); ++q) {
      const auto& f = battery[q];
      if (f.t == 0.0) {
        double F = 0.0;
        for (std::size_t k = 0; k < xi.size(); ++k) F += f.phi[k] * xi[k];
        out.emplace_back(V * F, lin_dir[q]);
      } else {
        GridField xt = semigroup_convolve(xi, f.t);
        double F = 0.0;
        for (std::size_t k = 0; k < xi.size(); ++k) F += f.phi[k] * xt[k] * xt[k];
        GridField grad = semigroup_convolve(2.0 * (f.phi * xt), f.t);
        out.emplace_back(V * F, dual_norm_sq(grad, e));
      }
    }
    return out;
  });

  std::vector<SgRow> rows;
  const std::size_t n = samples.size();
  for (std::size_t q = 0; q < battery.size(); ++q) {
    std::vector<double> F, D;
    for (const auto& s : samples) {
      F.push_back(s[q].first);
      D.push_back(s[q].second);
    }
    auto ratio_of = [&](const std::vector<std::size_t>& keep) {
      std::vector<double> f, d;
      for (auto i : keep) {
        f.push_back(F[i]);
        d.push_back(D[i]);
      }
      const double m = pairwise_sum(f) / f.size();
      std::vector<double> sq;
      for (double v : f) sq.push_back((v - m) * (v - m));
      return pairwise_sum(sq) / (f.size() - 1) / (pairwise_sum(d) / d.size());
    };
    SgRow row;
    row.ensemble = e.name();
    row.functional = battery[q].name;
    const Estimate mF = mean_estimate(F);
    std::vector<double> sq;
    for (double v : F) sq.push_back((v - mF.value) * (v - mF.value) * n / (n - 1.0));
    row.variance = mean_estimate(sq);
    row.dirichlet = mean_estimate(D);
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    row.ratio = ratio_of(all);
    row.ratio_stderr = jackknife_stderr(n, ratio_of);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mim
