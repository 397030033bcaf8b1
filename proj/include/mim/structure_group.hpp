#pragma once

#include <map>
#include <ostream>
#include <utility>

#include "json.hpp"

#include "mim/series.hpp"

namespace mim {

/// Generator data of Gamma*_{xy}: the shifts pi^(n) and the values Pi_x(y).
struct GammaData {
  UniversePtr universe;
  std::map<Key, RealSeries> pi_n;
  RealSeries base_values;

  /// Throws DomainError when pi^(n)_beta != 0 for some |n| >= |beta| or an
  /// unpopulated beta.
  void check_restriction() const;
};

/// Companion data for dGamma*: dpi^(0) and dpi^(n) for |n| = 1.
struct DerivativeGammaData {
  RealSeries dpi0;
  std::map<Key, RealSeries> dpi_n;
};

/// Sparse matrix (beta, gamma) -> (Gamma* z^gamma)_beta over one universe.
class GammaMatrix {
public:
  using Entries = std::map<std::pair<MultiIndex, MultiIndex>, double>;

  GammaMatrix() = default;
  explicit GammaMatrix(UniversePtr universe) : universe_(std::move(universe)) {}

  static GammaMatrix identity(UniversePtr universe);

  const UniversePtr& universe() const { return universe_; }
  const Entries& entries() const { return entries_; }
  double entry(const MultiIndex& beta, const MultiIndex& gamma) const;
  void set(const MultiIndex& beta, const MultiIndex& gamma, double v);

  /// (g s)_beta = sum_gamma g_beta^gamma s_gamma, restricted to the universe.
  RealSeries apply(const RealSeries& s) const;

  /// Column gamma as a series.
  RealSeries column(const MultiIndex& gamma) const;

  void write_csv(std::ostream& os) const;

private:
  UniversePtr universe_;
  Entries entries_;
};

GammaMatrix compose(const GammaMatrix& a, const GammaMatrix& b);

/// Largest |entry| of a - b.
double max_abs_diff(const GammaMatrix& a, const GammaMatrix& b);

/// Gamma* z^gamma via the generator actions extended multiplicatively. The
/// result keeps every index that can still divide a member of the universe;
/// gamma itself need not lie in the universe.
RealSeries gamma_of_monomial(const GammaData& g, const MultiIndex& gamma);

/// Gamma* applied to an arbitrary series (term by term via gamma_of_monomial).
RealSeries gamma_apply(const GammaData& g, const RealSeries& s);

/// Matrix of Gamma* over the universe.
GammaMatrix build_gamma(const GammaData& g);

/// dGamma* z^gamma = sum_{|n| <= 1} dpi^(n) Gamma*(D^(n) z^gamma), untruncated
/// apart from divisibility pruning.
RealSeries dgamma_of_monomial(const GammaData& g, const DerivativeGammaData& dg, const MultiIndex& gamma);

RealSeries dgamma_apply(const GammaData& g, const DerivativeGammaData& dg, const RealSeries& s);

GammaMatrix build_dgamma(const GammaData& g, const DerivativeGammaData& dg);

/// Product of two series keeping only terms that may divide a member of U.
RealSeries pruned_product(const RealSeries& a, const RealSeries& b, const IndexUniverse& U);

nlohmann::json series_to_json(const RealSeries& s);
RealSeries series_from_json(const nlohmann::json& j, UniversePtr universe = nullptr);
nlohmann::json gamma_data_to_json(const GammaData& g);

}  // namespace mim
