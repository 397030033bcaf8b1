#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mim/errors.hpp"

namespace mim {

/// A coordinate of the multi-index algebra: either a nonlinearity coefficient
/// z_k (k >= 0) or a polynomial parameter z_n (n a nonzero (1+d)-tuple).
class Key {
public:
  static Key coeff(int k);
  static Key poly(std::vector<int> n);

  bool is_coeff() const { return k_ >= 0; }
  bool is_poly() const { return k_ < 0; }
  int k() const { return k_; }
  const std::vector<int>& n() const { return n_; }

  /// Parabolic degree |n| = 2 n_0 + n_1 + ... + n_d (0 for coefficient keys).
  int parabolic_degree() const;

  std::string to_string() const;

  // Coefficient keys sort before polynomial keys; then by k, resp. lexicographically by n.
  std::strong_ordering operator<=>(const Key& other) const;
  bool operator==(const Key& other) const = default;

private:
  Key() = default;
  int k_ = -1;
  std::vector<int> n_;
};

/// Finitely supported exponent map over keys, stored sorted and without zero exponents.
class MultiIndex {
public:
  using Entry = std::pair<Key, int>;

  MultiIndex() = default;
  explicit MultiIndex(std::vector<Entry> entries);

  static MultiIndex zero() { return MultiIndex(); }
  static MultiIndex unit(const Key& key, int exponent = 1);
  static MultiIndex e_k(int k) { return unit(Key::coeff(k)); }
  static MultiIndex e_n(std::vector<int> n) { return unit(Key::poly(std::move(n))); }

  /// Parses the canonical text form, e.g. "k1^2*n(0,1)" or "0".
  static MultiIndex parse(std::string_view text);

  const std::vector<Entry>& entries() const { return entries_; }
  bool is_zero() const { return entries_.empty(); }
  int exponent(const Key& key) const;
  int total_degree() const;

  bool has_poly_keys() const;
  bool is_coeff_only() const { return !has_poly_keys(); }
  bool is_purely_polynomial() const;
  /// The key n when this index is e_n.
  const Key& single_key() const;

  MultiIndex operator+(const MultiIndex& other) const;
  /// Componentwise difference; requires other <= *this componentwise.
  MultiIndex operator-(const MultiIndex& other) const;
  bool divides(const MultiIndex& other) const;

  std::string to_string() const;

  bool operator==(const MultiIndex& other) const = default;
  /// Lexicographic order on the canonical entry list.
  std::strong_ordering operator<=>(const MultiIndex& other) const;

  std::size_t hash() const;

private:
  void canonicalize();
  std::vector<Entry> entries_;
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& b) const { return b.hash(); }
};

struct ModelParams {
  double alpha = 0.45;
  int d = 1;
  double homogeneity_cutoff = 2.0;
  /// Bound on the ordinal |beta|_prec; needed because the z_0 powers all share
  /// homogeneity alpha and the homogeneity bound alone does not give a finite set.
  double ordinal_cutoff = 2.0;

  int D() const { return d + 2; }
  void validate() const;
};

struct OrderingParams {
  double lambda1 = 0.75;
  double lambda2 = 0.5;
  void validate() const;
};

double homogeneity(const MultiIndex& beta, const ModelParams& params);
int noise_homogeneity(const MultiIndex& beta);
bool is_populated(const MultiIndex& beta);
double ordinal(const MultiIndex& beta, const OrderingParams& op);

/// Values k*alpha (k <= 8) lying within 1e-3 of an integer.
std::vector<int> alpha_resonances(double alpha);

/// Enumerated, ordered set of populated multi-indices below the cutoffs.
class IndexUniverse {
public:
  IndexUniverse(std::vector<MultiIndex> ordered, ModelParams params, OrderingParams op);

  const std::vector<MultiIndex>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool contains(const MultiIndex& b) const { return pos_.count(b) != 0; }
  std::size_t position(const MultiIndex& b) const;
  const ModelParams& params() const { return params_; }
  const OrderingParams& ordering() const { return op_; }

  /// True if b could be a componentwise sub-index of some member, i.e. a
  /// partial product that may still grow into a member.
  bool may_divide(const MultiIndex& b) const;

  /// True if b is populated and below both cutoffs, i.e. should be a member.
  bool should_contain(const MultiIndex& b) const;

private:
  std::vector<MultiIndex> indices_;
  std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> pos_;
  ModelParams params_;
  OrderingParams op_;
  std::vector<std::pair<Key, int>> max_exponent_;
  double max_homogeneity_ = 0.0;
};

using UniversePtr = std::shared_ptr<const IndexUniverse>;

/// All populated beta with |beta| < homogeneity_cutoff and |beta|_prec < ordinal_cutoff,
/// sorted by (ordinal, canonical key list).
std::vector<MultiIndex> enumerate_populated(const ModelParams& params, const OrderingParams& op,
                                            std::size_t max_size = 100000);

UniversePtr make_universe(const ModelParams& params, const OrderingParams& op,
                          std::size_t max_size = 100000);

/// All multi-indices b' with b' <= b componentwise.
std::vector<MultiIndex> sub_indices(const MultiIndex& beta);

struct Decompositions {
  std::vector<std::vector<MultiIndex>> tuples;
  /// Populated factors that were needed but absent from the universe.
  std::size_t missing = 0;
};

/// Ordered (k+1)-tuples of populated indices with e_k + b_1 + ... + b_{k+1} = beta.
Decompositions product_decompositions(const MultiIndex& beta, int k, const IndexUniverse& universe);

/// Ordered l-tuples of populated indices (b_1..b_l) such that beta - sum b_i is a
/// nonzero coefficient-only remainder; returned as (tuple, remainder). The zero
/// remainder is skipped since (D0)^l c has no component at 0.
struct RemainderDecomposition {
  std::vector<MultiIndex> factors;
  MultiIndex remainder;
};
std::vector<RemainderDecomposition> ladder_decompositions(const MultiIndex& beta, int l,
                                                          const IndexUniverse& universe,
                                                          std::size_t* missing = nullptr);

}  // namespace mim

template <>
struct std::hash<mim::MultiIndex> {
  std::size_t operator()(const mim::MultiIndex& b) const { return b.hash(); }
};
