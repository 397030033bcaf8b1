#include "mim/ensembles.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mim/errors.hpp"
#include "mim/spectral.hpp"

namespace mim {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

Philox4x32::Counter raw(std::uint64_t seed, std::uint64_t sample, std::uint32_t stream, std::uint32_t block) {
  Philox4x32::Counter c{block, stream, static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(sample >> 32)};
  Philox4x32::Key k{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Philox4x32::apply(c, k);
}

// 53-bit uniform in (0, 1) from two words.
inline double to_unit(std::uint32_t a, std::uint32_t b) {
  std::uint64_t m = (static_cast<std::uint64_t>(a >> 5) << 26) | (b >> 6);
  return (static_cast<double>(m) + 0.5) * 0x1.0p-53;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

Philox4x32::Counter Philox4x32::apply(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

std::array<double, 2> uniform_pair(std::uint64_t seed, std::uint64_t sample, std::uint32_t stream,
                                   std::uint32_t block) {
  auto w = raw(seed, sample, stream, block);
  return {to_unit(w[0], w[1]), to_unit(w[2], w[3])};
}

std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t sample, std::uint32_t stream,
                                  std::uint32_t block) {
  auto u = uniform_pair(seed, sample, stream, block);
  double r = std::sqrt(-2.0 * std::log(u[0]));
  double th = 2.0 * M_PI * u[1];
  return {r * std::cos(th), r * std::sin(th)};
}

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::gaussian_white: return "gaussian_white";
    case NoiseKind::gaussian_fractional: return "gaussian_fractional";
    case NoiseKind::uniform_cell: return "uniform_cell";
    case NoiseKind::rademacher_cell: return "rademacher_cell";
  }
  return "?";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  for (auto k : {NoiseKind::gaussian_white, NoiseKind::gaussian_fractional, NoiseKind::uniform_cell,
                 NoiseKind::rademacher_cell})
    if (to_string(k) == s) return k;
  throw ConfigError(fmt::format("unknown ensemble kind '{}'", s));
}

double EnsembleSpec::alpha(int d) const {
  return kind == NoiseKind::gaussian_fractional ? alpha_target : 2.0 - (d + 2) / 2.0;
}

// Multiplying white noise by a symbol of parabolic degree -2s raises alpha by 2s.
double EnsembleSpec::envelope_exponent(int d) const {
  return kind == NoiseKind::gaussian_fractional ? (alpha_target - 2.0 + (d + 2) / 2.0) / 2.0 : 0.0;
}

std::string EnsembleSpec::name() const {
  if (kind == NoiseKind::gaussian_fractional) return fmt::format("{}({})", to_string(kind), alpha_target);
  return to_string(kind);
}

void EnsembleSpec::validate() const {
  if (kind == NoiseKind::gaussian_fractional && !(alpha_target > 0.0 && alpha_target < 2.0))
    throw ConfigError(fmt::format("alpha_target must lie in (0, 2), got {}", alpha_target));
}

nlohmann::json to_json(const EnsembleSpec& e) {
  nlohmann::json j{{"kind", to_string(e.kind)}};
  if (e.kind == NoiseKind::gaussian_fractional) j["alpha_target"] = e.alpha_target;
  return j;
}

EnsembleSpec ensemble_from_json(const nlohmann::json& j) {
  EnsembleSpec e;
  if (j.is_string()) {
    e.kind = noise_kind_from_string(j.get<std::string>());
  } else {
    for (const auto& [k, v] : j.items())
      if (k != "kind" && k != "alpha_target") throw ConfigError(fmt::format("unknown ensemble field '{}'", k));
    if (j.contains("kind")) e.kind = noise_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("alpha_target")) e.alpha_target = j.at("alpha_target").get<double>();
  }
  e.validate();
  return e;
}

double envelope_power(const EnsembleSpec& spec, int d, double omega, double k2) {
  double w2 = omega * omega + k2 * k2;
  if (w2 == 0.0) return 0.0;
  return std::pow(w2, -spec.envelope_exponent(d));
}

GridField sample_noise(const EnsembleSpec& spec, const GridSpec& grid, std::uint64_t seed, std::uint64_t sample_id) {
  spec.validate();
  GridField f(grid);
  auto& v = f.values();
  const double sd = 1.0 / std::sqrt(grid.cell_volume());
  for (std::size_t i = 0; i < v.size(); i += 2) {
    auto g = normal_pair(seed, sample_id, 0, static_cast<std::uint32_t>(i / 2));
    for (std::size_t j = 0; j < 2 && i + j < v.size(); ++j) {
      double x = g[j];
      switch (spec.kind) {
        case NoiseKind::uniform_cell: x = std::sqrt(3.0) * (2.0 * normal_cdf(x) - 1.0); break;
        case NoiseKind::rademacher_cell: x = x < 0.0 ? -1.0 : 1.0; break;
        default: break;
      }
      v[i + j] = sd * x;
    }
  }
  if (spec.kind == NoiseKind::gaussian_fractional) {
    const int d = grid.d;
    f = apply_multiplier(f, [&](const Mode& m) {
      return std::complex<double>(std::sqrt(envelope_power(spec, d, m.freq[0], m.k2())), 0.0);
    });
  }
  return f;
}

GridField mollify(const GridField& xi, double tau) {
  if (!(tau > 0.0)) throw DomainError(fmt::format("mollify needs tau > 0, got {}", tau));
  return semigroup_convolve(xi, tau);
}

}  // namespace mim
