#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <utility>

#include "mim/combinatorics.hpp"
#include "mim/index.hpp"

namespace mim {

inline bool coeff_is_zero(double c) { return c == 0.0; }

/// Truncated element of R[[z_k, z_n]] with coefficients in C.
///
/// C needs copy construction, C + C, C * C and double * C, plus an
/// ADL-visible coeff_is_zero(const C&). A null universe means no truncation.
/// Products landing outside the universe are dropped; when the dropped index
/// is one the universe ought to contain (populated, below both cutoffs) the
/// truncation-loss counter is bumped as well.
template <class C>
class Series {
public:
  using Map = std::map<MultiIndex, C>;

  Series() = default;
  explicit Series(UniversePtr universe) : universe_(std::move(universe)) {}

  static Series monomial(const MultiIndex& beta, C value, UniversePtr universe = nullptr) {
    Series s(std::move(universe));
    s.add_to(beta, std::move(value));
    return s;
  }

  const Map& terms() const { return terms_; }
  const UniversePtr& universe() const { return universe_; }
  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  const C* find(const MultiIndex& beta) const {
    auto it = terms_.find(beta);
    return it == terms_.end() ? nullptr : &it->second;
  }

  /// Coefficient or `fallback` if absent.
  C get(const MultiIndex& beta, C fallback) const {
    auto it = terms_.find(beta);
    return it == terms_.end() ? fallback : it->second;
  }

  void set(const MultiIndex& beta, C value) {
    if (!admit(beta)) return;
    if (coeff_is_zero(value)) {
      terms_.erase(beta);
    } else {
      terms_.insert_or_assign(beta, std::move(value));
    }
  }

  void add_to(const MultiIndex& beta, C value) {
    if (!admit(beta)) return;
    auto it = terms_.find(beta);
    if (it == terms_.end()) {
      if (!coeff_is_zero(value)) terms_.emplace(beta, std::move(value));
      return;
    }
    it->second = it->second + value;
    if (coeff_is_zero(it->second)) terms_.erase(it);
  }

  std::size_t truncation_loss() const { return loss_; }
  std::size_t dropped() const { return dropped_; }

  Series operator+(const Series& other) const {
    Series r = *this;
    r.absorb_counters(other);
    for (const auto& [b, c] : other.terms_) r.add_to(b, c);
    return r;
  }

  Series operator-(const Series& other) const { return *this + other.scaled(-1.0); }

  Series scaled(double s) const {
    Series r(universe_);
    r.absorb_counters(*this);
    for (const auto& [b, c] : terms_) r.add_to(b, s * c);
    return r;
  }

  /// Cauchy product over index addition.
  Series operator*(const Series& other) const {
    Series r(universe_ ? universe_ : other.universe_);
    r.absorb_counters(*this);
    r.absorb_counters(other);
    for (const auto& [b1, c1] : terms_)
      for (const auto& [b2, c2] : other.terms_) r.add_to(b1 + b2, c1 * c2);
    return r;
  }

  /// Drops purely polynomial and non-populated indices.
  Series project_P() const {
    return filtered([](const MultiIndex& b) { return is_populated(b) && !b.is_purely_polynomial(); });
  }

  /// Drops indices of homogeneity >= 2.
  Series project_Q(const ModelParams& params) const {
    return filtered([&](const MultiIndex& b) { return homogeneity(b, params) < 2.0; });
  }

  /// Restriction to populated indices (the T* part).
  Series project_T() const {
    return filtered([](const MultiIndex& b) { return is_populated(b); });
  }

  /// D0 = sum_k (k+1) z_{k+1} d/dz_k.
  Series derive_D0() const {
    Series r(universe_);
    r.absorb_counters(*this);
    for (const auto& [b, c] : terms_)
      for (const auto& [key, e] : b.entries()) {
        if (!key.is_coeff()) continue;
        MultiIndex target = b - MultiIndex::unit(key) + MultiIndex::e_k(key.k() + 1);
        r.add_to(target, static_cast<double>(e) * static_cast<double>(key.k() + 1) * c);
      }
    return r;
  }

  /// D^(n) = d/dz_n.
  Series derive_Dn(const Key& n) const {
    if (!n.is_poly()) throw DomainError("derive_Dn needs a polynomial key");
    Series r(universe_);
    r.absorb_counters(*this);
    MultiIndex en = MultiIndex::unit(n);
    for (const auto& [b, c] : terms_) {
      int e = b.exponent(n);
      if (e > 0) r.add_to(b - en, static_cast<double>(e) * c);
    }
    return r;
  }

  template <class F>
  Series filtered(F keep) const {
    Series r(universe_);
    r.absorb_counters(*this);
    for (const auto& [b, c] : terms_)
      if (keep(b)) r.terms_.emplace(b, c);
    return r;
  }

  /// Same coefficients, re-truncated to another universe (null: untruncated).
  Series with_universe(UniversePtr u) const {
    Series r(std::move(u));
    r.absorb_counters(*this);
    for (const auto& [b, c] : terms_) r.add_to(b, c);
    return r;
  }

private:
  bool admit(const MultiIndex& beta) {
    if (!universe_ || universe_->contains(beta)) return true;
    ++dropped_;
    if (universe_->should_contain(beta)) ++loss_;
    return false;
  }

  void absorb_counters(const Series& other) {
    loss_ += other.loss_;
    dropped_ += other.dropped_;
  }

  UniversePtr universe_;
  Map terms_;
  std::size_t loss_ = 0;
  std::size_t dropped_ = 0;
};

using RealSeries = Series<double>;

/// s^k with s^0 the unit monomial at the empty index.
template <class C>
Series<C> power(const Series<C>& s, int k, const C& one) {
  Series<C> r = Series<C>::monomial(MultiIndex(), one, s.universe());
  for (int i = 0; i < k; ++i) r = r * s;
  return r;
}

inline RealSeries power(const RealSeries& s, int k) { return power(s, k, 1.0); }

/// sum_l v^l (D0)^l c / l!, i.e. the coordinates of a -> c[a(. + v)]. Stops
/// once the ladder vanishes (always within the universe) or after max_l steps.
inline RealSeries shift_counterterm(const RealSeries& c, double v, int max_l = 32) {
  RealSeries out = c;
  RealSeries term = c;
  for (int l = 1; l <= max_l; ++l) {
    term = term.derive_D0().scaled(v / l);
    if (term.empty()) break;
    out = out + term;
  }
  return out;
}

/// max_beta |a_beta - b_beta|.
inline double max_abs_diff(const RealSeries& a, const RealSeries& b) {
  double m = 0.0;
  for (const auto& [beta, c] : a.terms()) m = std::max(m, std::abs(c - b.get(beta, 0.0)));
  for (const auto& [beta, c] : b.terms())
    if (!a.find(beta)) m = std::max(m, std::abs(c));
  return m;
}

inline double max_abs(const RealSeries& a) {
  double m = 0.0;
  for (const auto& [beta, c] : a.terms()) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace mim
