#include "mim/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace mim {

void GridSpec::validate() const {
  if (d < 1 || d > 3) throw ConfigError("grid dimension d must be in 1..3");
  for (int n : {N0, N1}) {
    if (n < 8 || !std::has_single_bit(static_cast<unsigned>(n)))
      throw ConfigError(fmt::format("grid extents must be powers of two >= 8, got {}", n));
  }
  if (!(L0 > 0.0) || !(L > 0.0)) throw ConfigError("grid periods must be positive");
  if (static_cast<double>(N0) * std::pow(static_cast<double>(N1), d) > 1e9)
    throw ResourceError("grid too large");
}

std::size_t GridSpec::size() const {
  std::size_t n = static_cast<std::size_t>(N0);
  for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(N1);
  return n;
}

double GridSpec::cell_volume() const {
  double v = h(0);
  for (int i = 0; i < d; ++i) v *= h(1);
  return v;
}

std::vector<int> GridSpec::shape() const {
  std::vector<int> s(static_cast<std::size_t>(dims()), N1);
  s[0] = N0;
  return s;
}

GridSpec GridSpec::refined(int factor) const {
  GridSpec g = *this;
  g.N1 *= factor;
  g.N0 *= factor * factor;
  return g;
}

nlohmann::json to_json(const GridSpec& g) {
  return {{"d", g.d}, {"N0", g.N0}, {"N1", g.N1}, {"L0", g.L0}, {"L", g.L}};
}

GridSpec grid_from_json(const nlohmann::json& j, const GridSpec& defaults) {
  GridSpec g = defaults;
  g.d = j.value("d", g.d);
  g.N0 = j.value("N0", g.N0);
  g.N1 = j.value("N1", g.N1);
  g.L0 = j.value("L0", g.L0);
  g.L = j.value("L", g.L);
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------

SpaceTimePoint SpaceTimePoint::center(const GridSpec& g) {
  SpaceTimePoint p;
  for (int a = 0; a < g.dims(); ++a) p.idx.push_back(g.extent(a) / 2);
  return p;
}

std::vector<double> SpaceTimePoint::coords(const GridSpec& g) const {
  std::vector<double> c(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) c[a] = idx[a] * g.h(static_cast<int>(a));
  return c;
}

SpaceTimePoint SpaceTimePoint::shifted(const GridSpec& g, const std::vector<int>& offset) const {
  SpaceTimePoint p = *this;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    int n = g.extent(static_cast<int>(a));
    p.idx[a] = ((idx[a] + offset[a]) % n + n) % n;
  }
  return p;
}

std::vector<double> displacement(const GridSpec& g, const SpaceTimePoint& x, const SpaceTimePoint& y) {
  std::vector<double> v(x.idx.size());
  for (std::size_t a = 0; a < v.size(); ++a) {
    int n = g.extent(static_cast<int>(a));
    int di = ((y.idx[a] - x.idx[a]) % n + n) % n;
    if (di > n / 2) di -= n;
    v[a] = di * g.h(static_cast<int>(a));
  }
  return v;
}

double parabolic_norm(const std::vector<double>& v) {
  double r = std::sqrt(std::abs(v[0]));
  for (std::size_t a = 1; a < v.size(); ++a) r += std::abs(v[a]);
  return r;
}

double parabolic_distance(const GridSpec& g, const SpaceTimePoint& x, const SpaceTimePoint& y) {
  return parabolic_norm(displacement(g, x, y));
}

// ---------------------------------------------------------------------------

GridField::GridField(const GridSpec& spec, double value) : spec_(spec), v_(spec.size(), value) {}

GridField::GridField(const GridSpec& spec, std::vector<double> values) : spec_(spec), v_(std::move(values)) {
  if (v_.size() != spec_.size()) throw DomainError("field size does not match grid");
}

std::size_t GridField::flat(const SpaceTimePoint& p) const {
  std::size_t i = 0;
  for (int a = 0; a < spec_.dims(); ++a) {
    int n = spec_.extent(a);
    i = i * static_cast<std::size_t>(n) + static_cast<std::size_t>(((p.idx[static_cast<std::size_t>(a)] % n) + n) % n);
  }
  return i;
}

double GridField::at(const SpaceTimePoint& p) const { return v_.empty() ? 0.0 : v_[flat(p)]; }

double GridField::mean() const {
  if (v_.empty()) return 0.0;
  long double s = 0;
  for (double x : v_) s += x;
  return static_cast<double>(s / static_cast<long double>(v_.size()));
}

double GridField::max_abs() const {
  double m = 0;
  for (double x : v_) m = std::max(m, std::abs(x));
  return m;
}

double GridField::l2_norm() const {
  long double s = 0;
  for (double x : v_) s += static_cast<long double>(x) * x;
  return std::sqrt(static_cast<double>(s) * spec_.cell_volume());
}

GridField& GridField::operator+=(const GridField& o) {
  axpy(1.0, o);
  return *this;
}

GridField& GridField::operator-=(const GridField& o) {
  axpy(-1.0, o);
  return *this;
}

GridField& GridField::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

void GridField::axpy(double s, const GridField& o) {
  if (o.v_.empty()) return;
  if (v_.empty()) {
    spec_ = o.spec_;
    v_.assign(o.v_.size(), 0.0);
  }
  if (o.v_.size() != v_.size()) throw DomainError("field size mismatch");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += s * o.v_[i];
}

GridField GridField::shifted(const std::vector<int>& offset) const {
  GridField out(spec_);
  const int D = spec_.dims();
  std::vector<int> idx(static_cast<std::size_t>(D), 0);
  SpaceTimePoint p;
  for (std::size_t i = 0; i < v_.size(); ++i) {
    p.idx = idx;
    out.v_[out.flat(p.shifted(spec_, offset))] = v_[i];
    for (int a = D - 1; a >= 0; --a) {
      if (++idx[static_cast<std::size_t>(a)] < spec_.extent(a)) break;
      idx[static_cast<std::size_t>(a)] = 0;
    }
  }
  return out;
}

GridField GridField::reflected(int axis, int about) const {
  GridField out(spec_);
  const int D = spec_.dims();
  std::vector<int> idx(static_cast<std::size_t>(D), 0);
  SpaceTimePoint p;
  for (std::size_t i = 0; i < v_.size(); ++i) {
    p.idx = idx;
    p.idx[static_cast<std::size_t>(axis)] = 2 * about - idx[static_cast<std::size_t>(axis)];
    out.v_[out.flat(p)] = v_[i];
    for (int a = D - 1; a >= 0; --a) {
      if (++idx[static_cast<std::size_t>(a)] < spec_.extent(a)) break;
      idx[static_cast<std::size_t>(a)] = 0;
    }
  }
  return out;
}

void GridField::write_binary(std::ostream& os, const nlohmann::json& header) const {
  nlohmann::json h = header;
  h["grid"] = to_json(spec_);
  h["count"] = v_.size();
  os << h.dump() << '\n';
  static_assert(std::endian::native == std::endian::little, "binary dumps assume a little-endian host");
  os.write(reinterpret_cast<const char*>(v_.data()), static_cast<std::streamsize>(v_.size() * sizeof(double)));
}

GridField GridField::read_binary(std::istream& is, nlohmann::json* header) {
  std::string line;
  std::getline(is, line);
  auto h = nlohmann::json::parse(line);
  GridSpec g = grid_from_json(h.at("grid"));
  std::vector<double> v(h.at("count").get<std::size_t>());
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw DomainError("truncated field dump");
  if (header) *header = h;
  return GridField(g, std::move(v));
}

GridField operator+(GridField a, const GridField& b) {
  a += b;
  return a;
}

GridField operator-(GridField a, const GridField& b) {
  a -= b;
  return a;
}

GridField operator*(double s, GridField a) {
  a *= s;
  return a;
}

GridField operator*(const GridField& a, const GridField& b) {
  if (a.is_zero() || b.is_zero()) return GridField();
  if (a.size() != b.size()) throw DomainError("field size mismatch");
  GridField r(a.spec());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
  return r;
}

}  // namespace mim
