#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "mim/ensembles.hpp"
#include "mim/model.hpp"

namespace mim {

struct MCConfig {
  std::size_t n_samples = 200;
  int p = 2;
  std::uint64_t seed = 1;
  /// Absolute tau values, largest first; empty means the default ladder.
  std::vector<double> tau_ladder;
  /// Parabolic distances, multiples of the spatial cell; empty means default.
  std::vector<double> probe_radii;
  double kappa = 0.1;
  double epsilon = 0.1;
  double q_prime = 2.0;
  /// Samples for counterterm calibration (0: n_samples); drawn from a separate id range.
  std::size_t calibration_samples = 0;
  /// Samples for studies that rebuild the model at every probe point.
  std::size_t gamma_samples = 40;
  CounterTermEstimator estimator = CounterTermEstimator::zero_mode;
  unsigned workers = 1;

  void validate(const GridSpec& g) const;
  std::vector<double> taus(const GridSpec& g) const;
  std::vector<double> radii(const GridSpec& g) const;
  std::size_t n_calibration() const { return calibration_samples ? calibration_samples : n_samples; }
};

nlohmann::json to_json(const MCConfig& c);
MCConfig mc_from_json(const nlohmann::json& j);

/// t0 = 64 h1^4 and the ladder t0 * 2^-2 ... t0 * 2^-6.
double reference_time(const GridSpec& g);
std::vector<double> default_tau_ladder(const GridSpec& g);
std::vector<double> default_probe_radii(const GridSpec& g);

/// Sample ids used for counterterm calibration never collide with measurement ids.
constexpr std::uint64_t kCalibrationIdOffset = std::uint64_t{1} << 40;

// ---------------------------------------------------------------------------
// Deterministic parallel map and reduction

/// Runs fn(i) for i < n on `workers` threads; results are stored by index.
template <class F>
auto parallel_map(std::size_t n, unsigned workers, F fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using T = decltype(fn(std::size_t{}));
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex m;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
  };
  unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (w == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < w; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return out;
}

/// Pairwise (tree) sum in index order; the result depends only on the values.
double pairwise_sum(const double* v, std::size_t n);
inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

/// Sample mean and its standard error.
Estimate mean_estimate(const std::vector<double>& v);

/// (mean s)^(1/p) with delta-method error, s_i >= 0 per-sample statistics.
Estimate root_moment(const std::vector<double>& s, int p);

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
  double r2 = 0.0;
  std::vector<double> radii;
};

/// Least squares fit of log y against log x; at least 3 distinct x.
ExponentFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Block jackknife standard error of a statistic of per-sample data.
double jackknife_stderr(std::size_t n, const std::function<double(const std::vector<std::size_t>&)>& stat,
                        std::size_t blocks = 20);

// ---------------------------------------------------------------------------
// Counterterms and probe values

/// Builds one mollified sample.
GridField mollified_sample(const EnsembleSpec& e, const GridSpec& g, double tau, std::uint64_t seed,
                           std::uint64_t sample_id);

/// Fixes c_beta level by level in the run order: for each coefficient-only beta the
/// samples are built through beta with the counterterms found so far and c_beta is
/// the ensemble mean of the chosen statistic of the pre-counterterm right-hand side.
CounterTerm calibrate_counterterm(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& e, double tau,
                                  const MCConfig& mc);

/// Probe points around a base point: for every radius, +-r along each spatial axis.
struct ProbeSet {
  std::vector<double> radii;
  /// offsets[r] lists the grid offsets at radius index r.
  std::vector<std::vector<std::vector<int>>> offsets;
  static ProbeSet spatial(const GridSpec& g, const std::vector<double>& radii);
  std::size_t points() const;
};

/// Pi_{x beta}(x + offset) for every probe point, flattened radius-major.
using ProbeValues = std::map<MultiIndex, std::vector<double>>;

ProbeValues probe_values(const ModelRun& run, const ProbeSet& probes);

/// One ProbeValues per sample, base point at the grid center.
std::vector<ProbeValues> collect_probe_values(const PlanPtr& plan, const EnsembleSpec& e, const ProbeSet& probes,
                                              const MCConfig& mc, std::uint64_t id_offset = 0);

struct MomentRow {
  /// beta, or "beta|gamma" for Gamma* entries.
  std::string beta;
  double radius;
  int p;
  Estimate estimate;
};

/// Moments E^(1/p)|Pi_{x beta}(y)|^p over the probe radii and the fitted slope.
struct ScalingEstimate {
  std::vector<MomentRow> moments;
  ExponentFit fit;
};

ScalingEstimate estimate_scaling(const std::vector<ProbeValues>& samples, const ProbeSet& probes,
                                 const MultiIndex& beta, int p);

/// Per-sample statistic at one radius: mean over directions of |v|^p.
std::vector<double> radial_statistic(const std::vector<ProbeValues>& samples, const ProbeSet& probes,
                                     const MultiIndex& beta, std::size_t radius_index, int p);

/// Gamma*_{xy} entries for every probe point y, per sample: key (beta, gamma).
using GammaProbeValues = std::map<std::pair<MultiIndex, MultiIndex>, std::vector<double>>;

std::vector<GammaProbeValues> collect_gamma_values(const PlanPtr& plan, const EnsembleSpec& e,
                                                   const ProbeSet& probes,
                                                   const std::vector<std::pair<MultiIndex, MultiIndex>>& entries,
                                                   const MCConfig& mc);

ScalingEstimate estimate_gamma_scaling(const std::vector<GammaProbeValues>& samples, const ProbeSet& probes,
                                       const std::pair<MultiIndex, MultiIndex>& entry, int p);

}  // namespace mim
