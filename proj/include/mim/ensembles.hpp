#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "json.hpp"

#include "mim/grid.hpp"

namespace mim {

/// Philox4x32-10 counter-based generator (Salmon et al.).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter apply(Counter ctr, Key key);
};

/// Two standard normals for block `block` of stream `stream` of sample
/// `sample` under `seed`.
std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t sample, std::uint32_t stream,
                                  std::uint32_t block);

/// Two uniforms in (0, 1) from the same counter layout.
std::array<double, 2> uniform_pair(std::uint64_t seed, std::uint64_t sample, std::uint32_t stream,
                                   std::uint32_t block);

enum class NoiseKind { gaussian_white, gaussian_fractional, uniform_cell, rademacher_cell };

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

struct EnsembleSpec {
  NoiseKind kind = NoiseKind::gaussian_white;
  /// Target regularity of gaussian_fractional; ignored otherwise.
  double alpha_target = 0.45;

  /// Regularity exponent alpha of the law: 2 - D/2 for the cell kinds.
  double alpha(int d) const;
  /// Exponent s of the envelope (omega^2 + |k|^4)^(-s/2); 0 for the cell kinds.
  double envelope_exponent(int d) const;
  bool gaussian() const { return kind == NoiseKind::gaussian_white || kind == NoiseKind::gaussian_fractional; }
  std::string name() const;
  void validate() const;
};

nlohmann::json to_json(const EnsembleSpec& e);
EnsembleSpec ensemble_from_json(const nlohmann::json& j);

/// Deterministic in (seed, sample_id). Cell kinds have variance 1/cell volume
/// per cell; uniform and rademacher cells are monotone images of the same
/// normals that drive gaussian_white, so equal (seed, sample_id) couple them.
GridField sample_noise(const EnsembleSpec& spec, const GridSpec& grid, std::uint64_t seed, std::uint64_t sample_id);

/// xi * psi_tau.
GridField mollify(const GridField& xi, double tau);

/// Power multiplier applied to white noise by gaussian_fractional: |m|^2 at a mode
/// with (omega, k); zero at the zero mode.
double envelope_power(const EnsembleSpec& spec, int d, double omega, double k2);

}  // namespace mim
