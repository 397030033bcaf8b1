#pragma once

#include <array>
#include <complex>
#include <functional>
#include <vector>

#include "mim/grid.hpp"

namespace mim {

/// Half-complex spectrum of a real grid field (last axis stores N1/2+1 modes).
struct Spectrum {
  GridSpec spec;
  std::vector<std::complex<double>> c;
};

/// Unnormalized forward DFT.
Spectrum forward(const GridField& f);
/// Inverse DFT including the 1/N normalization.
GridField inverse(const Spectrum& s);

/// Signed mode numbers and angular frequencies for every stored coefficient.
inline constexpr int kMaxDims = 4;

struct Mode {
  std::size_t flat = 0;
  int dims = 0;
  std::array<int, kMaxDims> m{};        // signed mode numbers per axis
  std::array<double, kMaxDims> freq{};  // omega, k_1, ..., k_d
  std::array<bool, kMaxDims> nyquist{};
  double weight = 1.0;                  // multiplicity in the full spectrum (1 or 2)

  double k2() const {
    double s = 0;
    for (int a = 1; a < dims; ++a) s += freq[a] * freq[a];
    return s;
  }
};
void for_each_mode(const GridSpec& g, const std::function<void(const Mode&)>& fn);

using Multiplier = std::function<std::complex<double>(const Mode&)>;
GridField apply_multiplier(const GridField& f, const Multiplier& mult);
void apply_multiplier_inplace(Spectrum& s, const Multiplier& mult);

/// Fourier symbol exp(-t (omega^2 + |k|^4)).
double psi_symbol(double t, const Mode& m);
/// f * psi_t.
GridField semigroup_convolve(const GridField& f, double t);
std::complex<double> heat_symbol(const Mode& m);
/// Spectral inverse of (d0 - Laplacian); the zero mode is set to 0.
GridField heat_solve(const GridField& f);
/// (d0 - Laplacian) f.
GridField heat_operator(const GridField& f);
GridField laplacian(const GridField& f);
/// d^n f for a (1+d)-tuple n. Odd derivative orders drop the Nyquist mode.
GridField derivative(const GridField& f, const std::vector<int>& n);
/// Symbol of d^n at a mode, same convention as derivative().
std::complex<double> derivative_symbol(const std::vector<int>& n, const Mode& m);
/// d^n f evaluated at one node, straight from a precomputed spectrum.
double derivative_at(const Spectrum& s, const std::vector<int>& n, const SpaceTimePoint& x);

/// (cell volume / N * sum_{m != 0} |fhat_m|^2 (omega^2 + |k|^4)^{s/2})^{1/2}
double sobolev_norm(const GridField& f, double s);

/// The density of d^n psi_t on the grid, centered at index 0.
GridField kernel(const GridSpec& g, double t, const std::vector<int>& n);

/// Ratio of int |d^n psi_t(y - z)| (t^{1/4} + |x - y| + |y - z|)^theta dz to
/// (t^{1/4})^{-|n|} (t^{1/4} + |x - y|)^theta.
double moment_bound_probe(const GridSpec& g, double t, const SpaceTimePoint& x, const SpaceTimePoint& y,
                          double theta, const std::vector<int>& n);

/// All (1+d)-tuples with parabolic degree 2 n0 + n1 + ... < order.
std::vector<std::vector<int>> exponents_below(int d, double order);
int parabolic_degree(const std::vector<int>& n);

struct TaylorResult {
  GridField remainder;
  /// (n, d^n f(x)) for every |n| < order.
  std::vector<std::pair<std::vector<int>, double>> derivatives;
};

/// f minus its Taylor polynomial at x of parabolic degree < order, with the
/// polynomial evaluated on minimal periodic images of y - x.
TaylorResult taylor_subtract(const GridField& f, const SpaceTimePoint& x, double order);

/// (y - x)^n on the grid using minimal periodic images.
GridField monomial_field(const GridSpec& g, const SpaceTimePoint& x, const std::vector<int>& n);

}  // namespace mim
