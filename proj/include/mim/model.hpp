#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mim/poly_field.hpp"
#include "mim/structure_group.hpp"

namespace mim {

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

/// c in R[[z_k]] together with its Monte Carlo provenance.
struct CounterTerm {
  double tau = 0.0;
  std::map<MultiIndex, Estimate> entries;

  double value(const MultiIndex& beta) const;
  RealSeries series() const;
  nlohmann::json to_json() const;
  static CounterTerm from_json(const nlohmann::json& j);
};

/// Which per-sample statistic feeds the counterterm mean.
enum class CounterTermEstimator { zero_mode, base_point };

/// Decompositions and Taylor orders shared by every run over one universe.
class ModelPlan {
public:
  struct Entry {
    MultiIndex beta;
    std::size_t position = 0;
    double homogeneity = 0.0;
    double taylor_order = 0.0;
    bool resonant = false;
    bool polynomial = false;
    bool coeff_only = false;
    /// (k, tuples): the last factor of each tuple carries the Laplacian.
    std::vector<std::pair<int, std::vector<std::vector<MultiIndex>>>> products;
    /// (l, factors, ((D0)^l c)_remainder / l!)
    struct Ladder {
      int l;
      std::vector<MultiIndex> factors;
      double weight;
    };
    std::vector<Ladder> ladders;
  };

  ModelPlan(UniversePtr universe, GridSpec grid, double tau, CounterTerm c);

  const UniversePtr& universe() const { return universe_; }
  const GridSpec& grid() const { return grid_; }
  double tau() const { return tau_; }
  const CounterTerm& counterterm() const { return c_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& entry(const MultiIndex& beta) const;
  /// Populated factors needed by some decomposition but absent from the universe.
  std::size_t truncation_missing() const { return missing_; }
  std::vector<std::string> warnings() const { return warnings_; }

private:
  UniversePtr universe_;
  GridSpec grid_;
  double tau_;
  CounterTerm c_;
  std::vector<Entry> entries_;
  std::size_t missing_ = 0;
  std::vector<std::string> warnings_;
};

using PlanPtr = std::shared_ptr<const ModelPlan>;

struct Provenance {
  std::string ensemble;
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
  double tau = 0.0;
};

struct ModelRun {
  PlanPtr plan;
  SpaceTimePoint base;
  GridField xi_tau;
  std::map<MultiIndex, PolyField> pi;
  std::map<MultiIndex, PolyField> pi_minus;
  std::map<MultiIndex, PolyField> laplacian;
  /// Right-hand sides before the c_beta subtraction, for coefficient-only beta.
  std::map<MultiIndex, double> rhs_zero_mode;
  std::map<MultiIndex, double> rhs_at_base;
  /// Taylor data subtracted at the base point: beta -> (n, d^n).
  std::map<MultiIndex, std::vector<std::pair<std::vector<int>, double>>> taylor;
  Provenance provenance;

  const PolyField& component(const MultiIndex& beta) const;
};

/// beta-component of P sum_k z_k Pi^k Lap Pi + xi_tau 1 - sum_{l>=1} Pi^l (D0)^l c / l!,
/// i.e. everything except the l = 0 counterterm c_beta.
PolyField build_rhs(const ModelRun& run, const MultiIndex& beta);

/// Taylor-recentered heat solution of pi_minus at the run's base point.
PolyField integrate_component(const ModelRun& run, const MultiIndex& beta, const PolyField& pi_minus);

/// Recursion for one mollified noise sample at base point `base`; with `through`
/// set, stops after that index (a prefix in the run order).
ModelRun build_model(PlanPtr plan, const GridField& xi_tau, const SpaceTimePoint& base,
                     Provenance provenance = {}, const std::optional<MultiIndex>& through = std::nullopt);

// ---------------------------------------------------------------------------
// Recentering

struct RecenteringResult {
  GammaData data;
  /// max over the window of |Pi_x - Gamma* Pi_y - Pi_x(y)|, per beta.
  std::map<MultiIndex, double> residual;
  /// max over the window of |Pi_x|, per beta.
  std::map<MultiIndex, double> scale;
};

/// Reads off pi^(n)_{xy} recursively in the run order. Throws RecenteringError
/// when some residual exceeds tolerance * (1 + scale); tolerance <= 0 disables.
RecenteringResult extract_recentering(const ModelRun& run_x, const ModelRun& run_y, double tolerance = 1e-6);

struct RecenterMinusEntry {
  double window_max = 0.0;       // max |(Pi^-_x - Gamma* Pi^-_y)_beta| over the window
  double non_polynomial = 0.0;   // distance of the difference from a polynomial
  int polynomial_degree = -1;    // parabolic degree of its polynomial part
  double smoothed_at_y = 0.0;    // psi_t smoothed difference at y
  double scale = 0.0;            // max |Pi^-_x| over the window
};

std::map<MultiIndex, RecenterMinusEntry> verify_recenter_minus(const ModelRun& run_x, const ModelRun& run_y,
                                                               const GammaData& gamma, double t);

// ---------------------------------------------------------------------------
// Malliavin derivative

struct DirectionalDerivativeRun {
  const ModelRun* parent = nullptr;
  GridField direction;
  GridField direction_tau;
  std::map<MultiIndex, PolyField> delta_pi;
  std::map<MultiIndex, PolyField> delta_pi_minus;
  std::map<MultiIndex, PolyField> delta_laplacian;

  const PolyField& component(const MultiIndex& beta) const;
};

/// Linearized hierarchy along `direction` for |beta| < 2 (c is deterministic).
DirectionalDerivativeRun build_directional_derivative(const ModelRun& run, const GridField& direction);

struct DpiResult {
  DerivativeGammaData data;
  /// delta Pi_x - delta Pi_x(y) - dGamma* Q Pi_y, anchored at y, per beta.
  std::map<MultiIndex, PolyField> modelledness;
};

DpiResult extract_dpi(const DirectionalDerivativeRun& drun_x, const ModelRun& run_y, const GammaData& gamma);

/// |(psi_t * residual of the Pi^- derivative identity)_beta(y)| for every t in the ladder.
std::map<MultiIndex, std::vector<double>> verify_ho28(const DirectionalDerivativeRun& drun_x, const ModelRun& run_y,
                                                      const GammaData& gamma, const DerivativeGammaData& dgamma,
                                                      const std::vector<double>& t_ladder);

/// Residual of the Pi^- derivative identity (before smoothing), anchored at y.
std::map<MultiIndex, PolyField> ho28_residual(const DirectionalDerivativeRun& drun_x, const ModelRun& run_y,
                                              const GammaData& gamma, const DerivativeGammaData& dgamma);

// ---------------------------------------------------------------------------
// Dumps

/// One binary file per beta plus counterterm.json in `dir`.
void write_model_dump(const ModelRun& run, const std::string& dir, const nlohmann::json& header = {});

}  // namespace mim
