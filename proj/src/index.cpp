#include "mim/index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>

#include <fmt/format.h>

namespace mim {

// ---------------------------------------------------------------------------
// Key

Key Key::coeff(int k) {
  if (k < 0) throw DomainError(fmt::format("coefficient key needs k >= 0, got {}", k));
  Key key;
  key.k_ = k;
  return key;
}

Key Key::poly(std::vector<int> n) {
  if (n.empty()) throw DomainError("polynomial key needs a (1+d)-tuple");
  bool nonzero = false;
  for (int c : n) {
    if (c < 0) throw DomainError("polynomial key components must be nonnegative");
    nonzero = nonzero || c != 0;
  }
  if (!nonzero) throw DomainError("polynomial key n must be nonzero");
  Key key;
  key.n_ = std::move(n);
  return key;
}

int Key::parabolic_degree() const {
  if (is_coeff()) return 0;
  int deg = 2 * n_[0];
  for (std::size_t i = 1; i < n_.size(); ++i) deg += n_[i];
  return deg;
}

std::string Key::to_string() const {
  if (is_coeff()) return fmt::format("k{}", k_);
  std::string s = "n(";
  for (std::size_t i = 0; i < n_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(n_[i]);
  }
  return s + ")";
}

std::strong_ordering Key::operator<=>(const Key& other) const {
  if (is_coeff() != other.is_coeff()) return is_coeff() ? std::strong_ordering::less : std::strong_ordering::greater;
  if (is_coeff()) return k_ <=> other.k_;
  return std::lexicographical_compare_three_way(n_.begin(), n_.end(), other.n_.begin(), other.n_.end());
}

// ---------------------------------------------------------------------------
// MultiIndex

MultiIndex::MultiIndex(std::vector<Entry> entries) : entries_(std::move(entries)) { canonicalize(); }

void MultiIndex::canonicalize() {
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.first < b.first; });
  std::vector<Entry> merged;
  for (auto& e : entries_) {
    if (e.second < 0) throw DomainError("multi-index exponents must be nonnegative");
    if (!merged.empty() && merged.back().first == e.first) {
      merged.back().second += e.second;
    } else {
      merged.push_back(std::move(e));
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(), [](const Entry& e) { return e.second == 0; }),
               merged.end());
  entries_ = std::move(merged);
}

MultiIndex MultiIndex::unit(const Key& key, int exponent) { return MultiIndex({{key, exponent}}); }

int MultiIndex::exponent(const Key& key) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                             [](const Entry& e, const Key& k) { return e.first < k; });
  return (it != entries_.end() && it->first == key) ? it->second : 0;
}

int MultiIndex::total_degree() const {
  int s = 0;
  for (const auto& e : entries_) s += e.second;
  return s;
}

bool MultiIndex::has_poly_keys() const {
  return std::any_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.first.is_poly(); });
}

bool MultiIndex::is_purely_polynomial() const {
  return entries_.size() == 1 && entries_[0].first.is_poly() && entries_[0].second == 1;
}

const Key& MultiIndex::single_key() const {
  if (entries_.size() != 1) throw DomainError("multi-index is not a single key");
  return entries_[0].first;
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  std::vector<Entry> out;
  out.reserve(entries_.size() + other.entries_.size());
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() || b != other.entries_.end()) {
    if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
      out.push_back(*a++);
    } else if (a == entries_.end() || b->first < a->first) {
      out.push_back(*b++);
    } else {
      out.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  MultiIndex r;
  r.entries_ = std::move(out);
  return r;
}

MultiIndex MultiIndex::operator-(const MultiIndex& other) const {
  if (!other.divides(*this)) throw DomainError("multi-index difference would be negative");
  std::vector<Entry> out;
  for (const auto& e : entries_) {
    int rem = e.second - other.exponent(e.first);
    if (rem > 0) out.emplace_back(e.first, rem);
  }
  MultiIndex r;
  r.entries_ = std::move(out);
  return r;
}

bool MultiIndex::divides(const MultiIndex& other) const {
  for (const auto& e : entries_)
    if (other.exponent(e.first) < e.second) return false;
  return true;
}

std::string MultiIndex::to_string() const {
  if (entries_.empty()) return "0";
  std::string s;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) s += '*';
    s += entries_[i].first.to_string();
    if (entries_[i].second != 1) s += fmt::format("^{}", entries_[i].second);
  }
  return s;
}

MultiIndex MultiIndex::parse(std::string_view text) {
  auto fail = [&](const char* what) {
    throw DomainError(fmt::format("cannot parse multi-index '{}': {}", text, what));
  };
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) t += c;
  if (t.empty()) fail("empty");
  if (t == "0") return MultiIndex();
  std::vector<Entry> entries;
  std::size_t i = 0;
  auto read_int = [&]() {
    std::size_t start = i;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (start == i) fail("expected integer");
    return std::stoi(t.substr(start, i - start));
  };
  while (i < t.size()) {
    Key key = Key::coeff(0);
    if (t[i] == 'k') {
      ++i;
      key = Key::coeff(read_int());
    } else if (t[i] == 'n') {
      ++i;
      if (i >= t.size() || t[i] != '(') fail("expected '('");
      ++i;
      std::vector<int> n;
      while (true) {
        n.push_back(read_int());
        if (i >= t.size()) fail("unterminated tuple");
        if (t[i] == ',') {
          ++i;
          continue;
        }
        if (t[i] == ')') {
          ++i;
          break;
        }
        fail("bad tuple separator");
      }
      key = Key::poly(std::move(n));
    } else {
      fail("expected 'k' or 'n'");
    }
    int exp = 1;
    if (i < t.size() && t[i] == '^') {
      ++i;
      exp = read_int();
    }
    entries.emplace_back(std::move(key), exp);
    if (i < t.size()) {
      if (t[i] != '*') fail("expected '*'");
      ++i;
    }
  }
  return MultiIndex(std::move(entries));
}

std::strong_ordering MultiIndex::operator<=>(const MultiIndex& other) const {
  std::size_t n = std::min(entries_.size(), other.entries_.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (auto c = entries_[i].first <=> other.entries_[i].first; c != 0) return c;
    if (auto c = entries_[i].second <=> other.entries_[i].second; c != 0) return c;
  }
  return entries_.size() <=> other.entries_.size();
}

std::size_t MultiIndex::hash() const {
  std::size_t h = 0x9e3779b97f4a7c15ULL;
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
  for (const auto& [key, exp] : entries_) {
    mix(static_cast<std::size_t>(key.k() + 7));
    for (int c : key.n()) mix(static_cast<std::size_t>(c) * 31u + 1u);
    mix(static_cast<std::size_t>(exp) * 1000003u);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Parameters and gradings

void ModelParams::validate() const {
  if (d < 1) throw ConfigError("spatial dimension d must be >= 1");
  double lower = std::max(0.0, 1.0 - D() / 4.0);
  if (!(alpha > lower && alpha < 1.0))
    throw ConfigError(fmt::format("alpha = {} outside the admissible interval ({}, 1)", alpha, lower));
  if (!(homogeneity_cutoff >= alpha)) throw ConfigError("homogeneity_cutoff must be >= alpha");
  if (!(ordinal_cutoff > 0.0)) throw ConfigError("ordinal_cutoff must be positive");
}

void OrderingParams::validate() const {
  if (!(1.0 > lambda1 && lambda1 > lambda2 && lambda2 > 0.0))
    throw ConfigError("ordering parameters must satisfy 1 > lambda1 > lambda2 > 0");
}

int noise_homogeneity(const MultiIndex& beta) {
  int s = 0;
  for (const auto& [key, exp] : beta.entries()) s += key.is_coeff() ? key.k() * exp : -exp;
  return s;
}

static int polynomial_degree(const MultiIndex& beta) {
  int s = 0;
  for (const auto& [key, exp] : beta.entries()) s += key.parabolic_degree() * exp;
  return s;
}

double homogeneity(const MultiIndex& beta, const ModelParams& params) {
  return params.alpha * (1.0 + noise_homogeneity(beta)) + polynomial_degree(beta);
}

bool is_populated(const MultiIndex& beta) { return noise_homogeneity(beta) >= 0 || beta.is_purely_polynomial(); }

double ordinal(const MultiIndex& beta, const OrderingParams& op) {
  return noise_homogeneity(beta) + op.lambda1 * polynomial_degree(beta) + op.lambda2 * beta.exponent(Key::coeff(0));
}

std::vector<int> alpha_resonances(double alpha) {
  std::vector<int> out;
  for (int k = 1; k <= 8; ++k) {
    double v = k * alpha;
    if (std::abs(v - std::round(v)) < 1e-3) out.push_back(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Enumeration

namespace {

constexpr double kEps = 1e-12;

void poly_keys_up_to(int d, int max_degree, std::vector<Key>& out) {
  std::vector<int> n(static_cast<std::size_t>(d + 1), 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t axis, int budget) {
    if (axis == n.size()) {
      if (std::any_of(n.begin(), n.end(), [](int c) { return c != 0; })) out.push_back(Key::poly(n));
      return;
    }
    int w = axis == 0 ? 2 : 1;
    for (int c = 0; c * w <= budget; ++c) {
      n[axis] = c;
      rec(axis + 1, budget - c * w);
    }
    n[axis] = 0;
  };
  rec(0, max_degree);
}

bool ordinal_less(const MultiIndex& a, const MultiIndex& b, const OrderingParams& op) {
  double oa = ordinal(a, op);
  double ob = ordinal(b, op);
  if (std::abs(oa - ob) > kEps) return oa < ob;
  return a < b;
}

}  // namespace

std::vector<MultiIndex> enumerate_populated(const ModelParams& params, const OrderingParams& op,
                                            std::size_t max_size) {
  params.validate();
  op.validate();
  if (!std::isfinite(params.homogeneity_cutoff) || !std::isfinite(params.ordinal_cutoff))
    throw ResourceError("enumeration needs finite homogeneity and ordinal cutoffs");
  const double H = params.homogeneity_cutoff;
  const double O = params.ordinal_cutoff;
  const double a = params.alpha;

  std::vector<MultiIndex> out;
  auto push = [&](MultiIndex b) {
    out.push_back(std::move(b));
    if (out.size() > max_size)
      throw ResourceError(fmt::format("populated index set exceeds the limit of {} entries", max_size));
  };

  const int max_poly_degree = static_cast<int>(std::floor(H - a + 1.0));
  std::vector<Key> pkeys;
  poly_keys_up_to(params.d, std::max(max_poly_degree, 0), pkeys);

  // purely polynomial indices
  for (const auto& key : pkeys) {
    MultiIndex b = MultiIndex::unit(key);
    if (homogeneity(b, params) < H - kEps && ordinal(b, op) < O - kEps) push(std::move(b));
  }

  // multisets of polynomial keys with total parabolic degree below the budget
  std::vector<std::vector<MultiIndex::Entry>> poly_parts;
  {
    std::vector<MultiIndex::Entry> cur;
    std::function<void(std::size_t, int)> rec = [&](std::size_t from, int degree) {
      poly_parts.push_back(cur);
      for (std::size_t i = from; i < pkeys.size(); ++i) {
        int nd = degree + pkeys[i].parabolic_degree();
        if (a + nd >= H - kEps) continue;
        if (!cur.empty() && cur.back().first == pkeys[i]) {
          ++cur.back().second;
          rec(i, nd);
          --cur.back().second;
        } else {
          cur.emplace_back(pkeys[i], 1);
          rec(i, nd);
          cur.pop_back();
        }
      }
    };
    rec(0, 0);
  }

  for (int m = 0; a * (1 + m) < H - kEps; ++m) {
    for (const auto& pp : poly_parts) {
      int P = 0;
      int q = 0;
      for (const auto& [key, exp] : pp) {
        P += key.parabolic_degree() * exp;
        q += exp;
      }
      if (a * (1 + m) + P >= H - kEps) continue;
      double base_ord = m + op.lambda1 * P;
      if (base_ord >= O - kEps) continue;
      // partitions of m + q into parts k >= 1
      std::vector<MultiIndex::Entry> cur;
      std::function<void(int, int)> parts = [&](int remaining, int max_part) {
        if (remaining == 0) {
          for (int j = 0; base_ord + op.lambda2 * j < O - kEps; ++j) {
            std::vector<MultiIndex::Entry> entries = pp;
            entries.insert(entries.end(), cur.begin(), cur.end());
            if (j > 0) entries.emplace_back(Key::coeff(0), j);
            MultiIndex b(std::move(entries));
            if (b.is_purely_polynomial()) break;
            push(std::move(b));
          }
          return;
        }
        for (int k = std::min(remaining, max_part); k >= 1; --k) {
          cur.emplace_back(Key::coeff(k), 1);
          parts(remaining - k, k);
          cur.pop_back();
        }
      };
      parts(m + q, m + q);
    }
  }

  std::sort(out.begin(), out.end(), [&](const MultiIndex& x, const MultiIndex& y) { return ordinal_less(x, y, op); });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

IndexUniverse::IndexUniverse(std::vector<MultiIndex> ordered, ModelParams params, OrderingParams op)
    : indices_(std::move(ordered)), params_(params), op_(op) {
  std::map<Key, int> maxexp;
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (!pos_.emplace(indices_[i], i).second)
      throw DomainError("duplicate multi-index in universe: " + indices_[i].to_string());
    for (const auto& [key, exp] : indices_[i].entries()) {
      auto& m = maxexp[key];
      m = std::max(m, exp);
    }
    max_homogeneity_ = std::max(max_homogeneity_, homogeneity(indices_[i], params_));
  }
  max_exponent_.assign(maxexp.begin(), maxexp.end());
}

std::size_t IndexUniverse::position(const MultiIndex& b) const {
  auto it = pos_.find(b);
  if (it == pos_.end()) throw TruncationError("multi-index not in universe: " + b.to_string());
  return it->second;
}

bool IndexUniverse::may_divide(const MultiIndex& b) const {
  for (const auto& [key, exp] : b.entries()) {
    auto it = std::lower_bound(max_exponent_.begin(), max_exponent_.end(), key,
                               [](const std::pair<Key, int>& e, const Key& k) { return e.first < k; });
    if (it == max_exponent_.end() || !(it->first == key) || it->second < exp) return false;
  }
  return homogeneity(b, params_) <= max_homogeneity_ + kEps;
}

bool IndexUniverse::should_contain(const MultiIndex& b) const {
  return is_populated(b) && homogeneity(b, params_) < params_.homogeneity_cutoff - kEps &&
         ordinal(b, op_) < params_.ordinal_cutoff - kEps;
}

UniversePtr make_universe(const ModelParams& params, const OrderingParams& op, std::size_t max_size) {
  return std::make_shared<const IndexUniverse>(enumerate_populated(params, op, max_size), params, op);
}

// ---------------------------------------------------------------------------
// Decompositions

std::vector<MultiIndex> sub_indices(const MultiIndex& beta) {
  std::vector<MultiIndex> out{MultiIndex()};
  for (const auto& [key, exp] : beta.entries()) {
    std::vector<MultiIndex> next;
    next.reserve(out.size() * static_cast<std::size_t>(exp + 1));
    for (const auto& b : out)
      for (int e = 0; e <= exp; ++e) next.push_back(e == 0 ? b : b + MultiIndex::unit(key, e));
    out = std::move(next);
  }
  return out;
}

namespace {

// Ordered tuples of `count` populated factors summing exactly to `rest`.
void split_exact(const MultiIndex& rest, int count, const IndexUniverse& universe, std::vector<MultiIndex>& cur,
                 std::vector<std::vector<MultiIndex>>& out, std::size_t& missing) {
  if (count == 1) {
    if (!is_populated(rest)) return;
    if (!universe.contains(rest)) {
      ++missing;
      return;
    }
    cur.push_back(rest);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (const auto& first : sub_indices(rest)) {
    if (!is_populated(first)) continue;
    if (!universe.contains(first)) {
      ++missing;
      continue;
    }
    cur.push_back(first);
    split_exact(rest - first, count - 1, universe, cur, out, missing);
    cur.pop_back();
  }
}

}  // namespace

Decompositions product_decompositions(const MultiIndex& beta, int k, const IndexUniverse& universe) {
  Decompositions d;
  MultiIndex ek = MultiIndex::e_k(k);
  if (!ek.divides(beta)) return d;
  std::vector<MultiIndex> cur;
  split_exact(beta - ek, k + 1, universe, cur, d.tuples, d.missing);
  return d;
}

std::vector<RemainderDecomposition> ladder_decompositions(const MultiIndex& beta, int l,
                                                          const IndexUniverse& universe, std::size_t* missing) {
  std::vector<RemainderDecomposition> out;
  std::vector<MultiIndex> cur;
  std::size_t miss = 0;
  std::function<void(const MultiIndex&, int)> rec = [&](const MultiIndex& rest, int left) {
    if (left == 0) {
      if (rest.is_coeff_only() && !rest.is_zero()) out.push_back({cur, rest});
      return;
    }
    for (const auto& f : sub_indices(rest)) {
      if (!is_populated(f)) continue;
      if (!universe.contains(f)) {
        ++miss;
        continue;
      }
      cur.push_back(f);
      rec(rest - f, left - 1);
      cur.pop_back();
    }
  };
  rec(beta, l);
  if (missing) *missing += miss;
  return out;
}

}  // namespace mim
