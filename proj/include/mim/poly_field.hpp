#pragma once

#include <map>
#include <vector>

#include "mim/spectral.hpp"

namespace mim {

/// sum_m Q_m(y) (y - a)^m with periodic coefficients Q_m on the grid and a
/// fixed anchor node a. Model components carry polynomial factors (y - x)^n,
/// which this keeps exact instead of sampling them on the torus.
class PolyField {
public:
  using Exponent = std::vector<int>;
  using Terms = std::map<Exponent, GridField>;

  PolyField() = default;
  PolyField(const GridSpec& spec, SpaceTimePoint anchor) : spec_(spec), anchor_(std::move(anchor)) {}

  static PolyField periodic(GridField q, SpaceTimePoint anchor);
  static PolyField monomial(const GridSpec& spec, SpaceTimePoint anchor, const Exponent& m, double coeff = 1.0);
  static PolyField constant(const GridSpec& spec, SpaceTimePoint anchor, double c);

  const GridSpec& spec() const { return spec_; }
  const SpaceTimePoint& anchor() const { return anchor_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  /// Q_m, or an empty (zero) field.
  const GridField& coeff(const Exponent& m) const;
  /// Largest parabolic degree carried; -1 for zero.
  int degree() const;

  void add_term(const Exponent& m, const GridField& q, double s = 1.0);
  PolyField& operator+=(const PolyField& o);
  PolyField& operator-=(const PolyField& o);
  PolyField& operator*=(double s);
  void axpy(double s, const PolyField& o);

  /// Same function expanded around another node. Both anchors must be
  /// connected by the minimal-image displacement.
  PolyField reanchored(const SpaceTimePoint& b) const;

  /// Value at a node, with (y - a) the minimal-image displacement.
  double eval(const SpaceTimePoint& y) const;
  /// d^n at a node, Q derivatives taken spectrally.
  double derivative_at(const std::vector<int>& n, const SpaceTimePoint& y) const;
  /// Values on the whole grid (minimal images), e.g. for dumps.
  GridField sampled() const;

  PolyField laplacian() const;
  /// (d0 - Laplacian) applied termwise.
  PolyField heat_operator() const;
  /// The solution of (d0 - Laplacian) R = this with mean-free coefficients;
  /// constant-coefficient polynomial parts of the source are projected out.
  PolyField heat_solve() const;
  /// psi_t convolution.
  PolyField smoothed(double t) const;

  struct Taylor;
  /// Subtracts the Taylor polynomial of parabolic degree < order at the anchor.
  Taylor taylor_subtract(double order) const;

  /// Largest |Q_m - mean Q_m| over all m (zero iff the field is a polynomial).
  double non_polynomial_norm() const;
  /// max |value| over the box window of half-widths (N0/4, N1/4) around `center`.
  double max_abs_window(const SpaceTimePoint& center) const;

private:
  GridSpec spec_;
  SpaceTimePoint anchor_;
  Terms terms_;
};

struct PolyField::Taylor {
  PolyField remainder;
  std::vector<std::pair<std::vector<int>, double>> derivatives;
};

PolyField operator+(PolyField a, const PolyField& b);
PolyField operator-(PolyField a, const PolyField& b);
PolyField operator*(double s, PolyField a);
/// Pointwise product; anchors must agree.
PolyField operator*(const PolyField& a, const PolyField& b);

/// Window nodes: offsets with |i0| <= N0/4, |i_a| <= N1/4 around a center.
std::vector<SpaceTimePoint> window_nodes(const GridSpec& g, const SpaceTimePoint& center, int stride = 1);

}  // namespace mim
