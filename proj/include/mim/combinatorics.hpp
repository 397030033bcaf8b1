#pragma once

#include <cstdint>
#include <vector>

#include "mim/errors.hpp"

namespace mim {

/// n! as exact unsigned 128-bit integer; throws past 33!.
inline unsigned __int128 factorial_exact(int n) {
  if (n < 0) throw DomainError("factorial of a negative number");
  if (n > 33) throw DomainError("factorial overflows 128 bits");
  unsigned __int128 r = 1;
  for (int i = 2; i <= n; ++i) r *= static_cast<unsigned>(i);
  return r;
}

inline double factorial(int n) { return static_cast<double>(factorial_exact(n)); }

/// binom(n, k) by the multiplicative formula; every partial product is itself a binomial, so
/// division is exact.
inline unsigned __int128 binomial_exact(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
  }
  return r;
}

inline double binomial(int n, int k) { return static_cast<double>(binomial_exact(n, k)); }

/// Product of componentwise binomials binom(n_i, m_i).
inline double binomial(const std::vector<int>& n, const std::vector<int>& m) {
  double r = 1.0;
  for (std::size_t i = 0; i < n.size(); ++i) r *= binomial(n[i], m[i]);
  return r;
}

/// Product of componentwise factorials.
inline double factorial(const std::vector<int>& n) {
  double r = 1.0;
  for (int c : n) r *= factorial(c);
  return r;
}

}  // namespace mim
