#pragma once

#include <map>
#include <string>
#include <vector>

#include "mim/mc.hpp"

namespace mim {

/// Counterterms calibrated at every rung of the tau ladder.
struct CalibratedLadder {
  std::vector<double> taus;
  std::vector<CounterTerm> counterterms;
};

CalibratedLadder calibrate_ladder(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& e, const MCConfig& mc);

/// Fitted exponent of |c_beta| against tau^(1/4) along the ladder.
ExponentFit counterterm_divergence(const CalibratedLadder& ladder, const MultiIndex& beta);

// ---------------------------------------------------------------------------

struct CauchyRow {
  MultiIndex beta;
  double tau = 0.0;
  double tau_prime = 0.0;
  Estimate distance;
};

struct CauchyReport {
  double radius = 0.0;
  std::vector<CauchyRow> rows;
  /// log distance against log (tau - tau')^(1/4), jackknife error.
  std::map<MultiIndex, ExponentFit> decay;
};

/// E^(1/p)|Pi^(tau)_{x beta}(y) - Pi^(tau')_{x beta}(y)|^p for adjacent rungs, shared
/// underlying samples, probe points at radius `radius`; |beta| < 2 only.
CauchyReport cauchy_study(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& e,
                          const CalibratedLadder& ladder, const MCConfig& mc, double radius);

// ---------------------------------------------------------------------------

struct UniversalityRow {
  MultiIndex beta;
  double tau = 0.0;
  double radius = 0.0;  // 0 for the aggregate over all probe radii
  Estimate moment_a;
  Estimate moment_b;
  double std_diff = 0.0;  // (a - b) / sqrt(se_a^2 + se_b^2)
  double triple_norm = 0.0;
};

struct UniversalityReport {
  std::string ensemble_a, ensemble_b;
  std::vector<UniversalityRow> rows;
  /// |std_diff| of the radius aggregate per beta, in ladder order.
  std::map<MultiIndex, std::vector<double>> aggregate;
};

/// Moment profiles of two ensembles at every rung; the triple-norm surrogate is
/// sup over probe points of r^(kappa - |beta|) E^(1/p)|Pi_a - Pi_b|^p for runs
/// driven by equal (seed, sample id), which couples the cell ensembles.
UniversalityReport universality_study(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& a,
                                      const EnsembleSpec& b, const CalibratedLadder& ladder_a,
                                      const CalibratedLadder& ladder_b, const MCConfig& mc);

// ---------------------------------------------------------------------------

struct CovarianceReport {
  /// max over beta of the window difference between shifting the sample and moving the base point.
  double shift_max_diff = 0.0;
  double shift_scale = 0.0;
  /// z-score of E Pi(y) - sigma E Pi(Ry) aggregated over radii, sigma the reflection parity of beta.
  std::map<MultiIndex, double> reflection_z;
  /// z-score of second moments on a grid rescaled by s, aggregated over radii (white noise only).
  std::map<MultiIndex, double> rescale_z;
  double rescale_s = 0.5;
};

/// Sign picked up by Pi_{x beta} under a spatial reflection about x.
int reflection_parity(const MultiIndex& beta);

CovarianceReport covariance_tests(const UniversePtr& U, const GridSpec& g, const EnsembleSpec& e, double tau,
                                  const MCConfig& mc, bool rescale = true);

// ---------------------------------------------------------------------------

struct SgRow {
  std::string ensemble;
  std::string functional;
  Estimate variance;
  Estimate dirichlet;  // E ||dF/dxi||_*^2
  double ratio = 0.0;
  double ratio_stderr = 0.0;
};

/// ||f||_*^2 paired with the covariance of the ensemble: sum over modes of the
/// noise power times |f^|^2.
double dual_norm_sq(const GridField& f, const EnsembleSpec& e);

std::vector<SgRow> spectral_gap_diagnostic(const EnsembleSpec& e, const GridSpec& g, const MCConfig& mc);

}  // namespace mim
