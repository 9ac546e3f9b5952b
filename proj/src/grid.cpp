#include "nnpde/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "nnpde/errors.hpp"

namespace nnpde {

SpaceTimeGrid::SpaceTimeGrid(int t_count, int x_count, int y_count, double t_max, double x_min,
                             double x_max, double y_min, double y_max)
    : nt_(t_count),
      nx_(x_count),
      ny_(y_count),
      t_max_(t_max),
      x_min_(x_min),
      x_max_(x_max),
      y_min_(y_min),
      y_max_(y_max) {
  if (nt_ < 3 || nx_ < 3 || ny_ < 3) {
    throw ConfigError("grid needs at least 3 nodes per axis, got " + describe(*this));
  }
  if (!(t_max_ > 0.0) || !(x_max_ > x_min_) || !(y_max_ > y_min_)) {
    throw ConfigError("degenerate grid extents: " + describe(*this));
  }
  if (dt() < 1e-12 || hx() < 1e-12 || hy() < 1e-12) {
    throw ConfigError("grid spacing below 1e-12: " + describe(*this));
  }
}

SpaceTimeGrid SpaceTimeGrid::reference(int t_count, int x_count, int y_count) {
  return SpaceTimeGrid(t_count, x_count, y_count, 1.0, 0.0, 0.5, 0.0, 1.0);
}

std::vector<double> SpaceTimeGrid::node_weights() const {
  std::vector<double> w(size());
  for (int n = 0; n < nt_; ++n)
    for (int i = 0; i < nx_; ++i)
      for (int j = 0; j < ny_; ++j) w[index(n, i, j)] = weight(n, i, j);
  return w;
}

std::string describe(const SpaceTimeGrid& g) {
  std::ostringstream os;
  os << g.t_count() << "x" << g.x_count() << "x" << g.y_count() << " over [0," << g.t_max()
     << "]x[" << g.x_min() << "," << g.x_max() << "]x[" << g.y_min() << "," << g.y_max() << "]";
  return os.str();
}

Field::Field(const SpaceTimeGrid& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

Field::Field(const SpaceTimeGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw StructuralError("field has " + std::to_string(values_.size()) + " values, grid " +
                          describe(grid_) + " needs " + std::to_string(grid_.size()));
  }
}

std::span<const double> Field::slice(int n) const {
  return std::span<const double>(values_).subspan(grid_.index(n, 0, 0), grid_.slice_size());
}

std::span<double> Field::slice(int n) {
  return std::span<double>(values_).subspan(grid_.index(n, 0, 0), grid_.slice_size());
}

Field& Field::operator+=(const Field& other) {
  require_same_grid(*this, other, "Field::operator+=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_grid(*this, other, "Field::operator-=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

void require_same_grid(const Field& a, const Field& b, const char* where) {
  if (!(a.grid() == b.grid())) {
    throw StructuralError(std::string(where) + ": grid mismatch (" + describe(a.grid()) +
                          " vs " + describe(b.grid()) + ")");
  }
}

double inner_product_l2(const Field& a, const Field& b) {
  require_same_grid(a, b, "inner_product_l2");
  const auto& g = a.grid();
  double total = 0.0;
  for (int n = 0; n < g.t_count(); ++n) {
    total += g.weight_t(n) * slice_inner_product(a, b, n);
  }
  return total;
}

double slice_inner_product(const Field& a, const Field& b, int n) {
  const auto& g = a.grid();
  double s = 0.0;
  for (int i = 0; i < g.x_count(); ++i) {
    double row = 0.0;
    for (int j = 0; j < g.y_count(); ++j) row += g.weight_y(j) * a(n, i, j) * b(n, i, j);
    s += g.weight_x(i) * row;
  }
  return s;
}

namespace {

// Central differences inside, second-order one-sided differences on the boundary.
double derivative(const auto& at, int k, int count, double h) {
  if (k == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  if (k == count - 1) return (3.0 * at(k) - 4.0 * at(k - 1) + at(k - 2)) / (2.0 * h);
  return (at(k + 1) - at(k - 1)) / (2.0 * h);
}

double gradient_sq_slice(const Field& f, int n) {
  const auto& g = f.grid();
  const int nx = g.x_count(), ny = g.y_count();
  double s = 0.0;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const double dx = derivative([&](int ii) { return f(n, ii, j); }, i, nx, g.hx());
      const double dy = derivative([&](int jj) { return f(n, i, jj); }, j, ny, g.hy());
      s += g.weight_space(i, j) * (dx * dx + dy * dy);
    }
  }
  return s;
}

}  // namespace

double norm(const Field& f, NormKind kind) {
  const auto& g = f.grid();
  switch (kind) {
    case NormKind::L2_DT:
      return std::sqrt(std::max(0.0, inner_product_l2(f, f)));
    case NormKind::Linf_DT: {
      double m = 0.0;
      for (double v : f.values()) m = std::max(m, std::abs(v));
      return m;
    }
    case NormKind::L2t_H1x: {
      double s = 0.0;
      for (int n = 0; n < g.t_count(); ++n) {
        s += g.weight_t(n) * (slice_inner_product(f, f, n) + gradient_sq_slice(f, n));
      }
      return std::sqrt(std::max(0.0, s));
    }
    case NormKind::Linft_L2x: {
      double m = 0.0;
      for (int n = 0; n < g.t_count(); ++n) m = std::max(m, slice_inner_product(f, f, n));
      return std::sqrt(m);
    }
  }
  return 0.0;
}

Field sample_function(const SpaceTimeGrid& grid, const SpaceTimeFunction& fn) {
  Field out(grid);
  for (int n = 0; n < grid.t_count(); ++n)
    for (int i = 0; i < grid.x_count(); ++i)
      for (int j = 0; j < grid.y_count(); ++j) {
        const double v = fn(grid.t(n), grid.x(i), grid.y(j));
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "non-finite sample at (t,x,y)=(" << grid.t(n) << "," << grid.x(i) << ","
             << grid.y(j) << ")";
          throw DataError(os.str());
        }
        out(n, i, j) = v;
      }
  return out;
}

void write_field_csv(std::ostream& out, const Field& f) {
  const auto& g = f.grid();
  out << "t,x,y,value\n" << std::setprecision(17);
  for (int n = 0; n < g.t_count(); ++n)
    for (int i = 0; i < g.x_count(); ++i)
      for (int j = 0; j < g.y_count(); ++j)
        out << g.t(n) << ',' << g.x(i) << ',' << g.y(j) << ',' << f(n, i, j) << '\n';
}

Field read_field_csv(std::istream& in, const SpaceTimeGrid& grid) {
  std::string line;
  if (!std::getline(in, line) || line != "t,x,y,value") {
    throw DataError("field CSV: expected header 't,x,y,value'");
  }
  std::vector<double> values;
  values.reserve(grid.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw DataError("field CSV: malformed row '" + line + "'");
    double v = 0.0;
    const char* first = line.data() + comma + 1;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw DataError("field CSV: bad value in '" + line + "'");
    values.push_back(v);
  }
  if (values.size() != grid.size()) {
    throw StructuralError("field CSV has " + std::to_string(values.size()) + " rows, grid needs " +
                          std::to_string(grid.size()));
  }
  return Field(grid, std::move(values));
}

}  // namespace nnpde
