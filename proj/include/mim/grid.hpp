#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "mim/errors.hpp"

namespace mim {

/// Periodic space-time lattice: N0 points over period L0 in time, N1 points
/// over period L in each of d spatial directions. Row-major, time slowest.
struct GridSpec {
  int d = 1;
  int N0 = 512;
  int N1 = 128;
  double L0 = 1.0 / 16.0;
  double L = 1.0;

  void validate() const;
  int dims() const { return d + 1; }
  int extent(int axis) const { return axis == 0 ? N0 : N1; }
  double period(int axis) const { return axis == 0 ? L0 : L; }
  double h(int axis) const { return period(axis) / extent(axis); }
  std::size_t size() const;
  double cell_volume() const;
  std::vector<int> shape() const;

  /// Grid refined by `factor` in space and factor^2 in time, same periods.
  GridSpec refined(int factor = 2) const;

  bool operator==(const GridSpec&) const = default;
};

nlohmann::json to_json(const GridSpec& g);
GridSpec grid_from_json(const nlohmann::json& j, const GridSpec& defaults = {});

/// A lattice node, stored as integer indices (one per axis).
struct SpaceTimePoint {
  std::vector<int> idx;

  static SpaceTimePoint center(const GridSpec& g);
  std::vector<double> coords(const GridSpec& g) const;
  /// Node displaced by integer offsets, wrapped onto the torus.
  SpaceTimePoint shifted(const GridSpec& g, const std::vector<int>& offset) const;
  bool operator==(const SpaceTimePoint&) const = default;
};

/// y - x using the minimal periodic image on every axis.
std::vector<double> displacement(const GridSpec& g, const SpaceTimePoint& x, const SpaceTimePoint& y);

/// sqrt|x0 - y0| + sum_i |xi - yi| with minimal periodic images.
double parabolic_distance(const GridSpec& g, const SpaceTimePoint& x, const SpaceTimePoint& y);
double parabolic_norm(const std::vector<double>& v);

class GridField {
public:
  GridField() = default;
  explicit GridField(const GridSpec& spec, double value = 0.0);
  GridField(const GridSpec& spec, std::vector<double> values);

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return v_.size(); }
  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }
  double operator[](std::size_t i) const { return v_[i]; }
  double& operator[](std::size_t i) { return v_[i]; }
  double at(const SpaceTimePoint& p) const;
  std::size_t flat(const SpaceTimePoint& p) const;

  double mean() const;
  double max_abs() const;
  /// sqrt(cell volume * sum v^2)
  double l2_norm() const;
  bool is_zero() const { return v_.empty(); }

  GridField& operator+=(const GridField& o);
  GridField& operator-=(const GridField& o);
  GridField& operator*=(double s);
  /// this += s * o
  void axpy(double s, const GridField& o);

  /// f(. - offset): value at node i moves to node i + offset.
  GridField shifted(const std::vector<int>& offset) const;
  /// f(reflected x_axis about the node `about`).
  GridField reflected(int axis, int about) const;

  /// Raw dump: one JSON header line, then little-endian float64 values.
  void write_binary(std::ostream& os, const nlohmann::json& header) const;
  static GridField read_binary(std::istream& is, nlohmann::json* header = nullptr);

private:
  GridSpec spec_;
  std::vector<double> v_;
};

GridField operator+(GridField a, const GridField& b);
GridField operator-(GridField a, const GridField& b);
GridField operator*(double s, GridField a);
/// Pointwise product.
GridField operator*(const GridField& a, const GridField& b);

/// Sparse coefficients in series use empty fields as zero.
inline bool coeff_is_zero(const GridField& f) { return f.is_zero(); }

}  // namespace mim
