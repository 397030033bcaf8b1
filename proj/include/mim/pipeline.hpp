#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mim/studies.hpp"

namespace mim {

/// Everything a subcommand needs, resolved and validated.
struct RunConfig {
  ModelParams params;
  OrderingParams ordering;
  GridSpec grid;
  EnsembleSpec ensemble;
  /// Second ensemble of the universality suite.
  EnsembleSpec ensemble_b{NoiseKind::uniform_cell};
  MCConfig mc;
  std::string out = "out";
  /// counterterm.json written by `calibrate`; empty means <out>/counterterm.json.
  std::string calibration;

  // command options
  /// Sample id built by `build`.
  std::uint64_t build_sample = 0;
  /// Second base point of the `build` report, as a grid offset from the center.
  std::vector<int> build_offset{5, -3};
  /// Rung of the tau ladder used by `build` and `mc` (negative counts from the end).
  int tau_index = -1;
  /// Probe radius of the Cauchy study; 0 means L/8.
  double cauchy_radius = 0.0;
  /// Statistical tolerances of the soft checks.
  double slope_tol_zero = 0.15;
  double slope_tol_k1 = 0.2;
  double slope_tol_gamma = 0.2;
  double divergence_tol = 0.25;
  double z_tol = 2.0;

  // limits
  std::size_t max_grid_points = std::size_t{1} << 22;
  std::size_t max_indices = 100000;

  /// Throws ConfigError on inconsistent fields, ResourceError past the limits.
  void validate() const;
  double tau() const;
  double cauchy_r() const { return cauchy_radius > 0 ? cauchy_radius : grid.L / 8; }
  std::string calibration_path() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Unknown keys are rejected; missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
/// JSON with // and /* */ comments allowed.
RunConfig load_run_config(const std::string& path);

struct Check {
  std::string name;
  bool hard = true;
  bool passed = false;
  std::string detail;
};

struct CommandResult {
  std::vector<Check> checks;
  void add(std::string name, bool hard, bool passed, std::string detail = {});
  bool hard_ok() const;
  bool soft_ok() const;
};

/// Writes checks.json (machine-readable failure list) next to the outputs.
void write_checks(const std::string& dir, const CommandResult& r);

CommandResult cmd_enumerate(const RunConfig& c);
CommandResult cmd_calibrate(const RunConfig& c);
CommandResult cmd_build(const RunConfig& c);
CommandResult cmd_mc(const RunConfig& c);
CommandResult cmd_converge(const RunConfig& c);
CommandResult cmd_universality(const RunConfig& c);
CommandResult cmd_verify(const RunConfig& c);

/// Calibrated ladder of `e` as stored by `calibrate`.
nlohmann::json ladder_to_json(const CalibratedLadder& l, const EnsembleSpec& e, const GridSpec& g);
CalibratedLadder ladder_from_json(const nlohmann::json& j, const EnsembleSpec& e, const GridSpec& g);

/// Loads the calibration, or throws ConfigError naming the calibrate subcommand.
CounterTerm load_counterterm(const RunConfig& c);

/// c_{k=1} on a grid with doubled spatial and temporal periods at equal cells,
/// against the value on the configured grid.
struct PeriodDoubling {
  Estimate base;
  Estimate doubled;
  double z = 0.0;
};
PeriodDoubling period_doubling_bias(const RunConfig& c, double tau);

}  // namespace mim
