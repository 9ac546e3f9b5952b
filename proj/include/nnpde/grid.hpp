#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nnpde {

// Uniform tensor grid over [0, t_max] x [x_min, x_max] x [y_min, y_max].
// PDE time is the slowest index, so reversing time is reversing the outer index.
class SpaceTimeGrid {
 public:
  SpaceTimeGrid(int t_count, int x_count, int y_count, double t_max, double x_min, double x_max,
                double y_min, double y_max);

  // The rectangle [0,0.5] x [0,1] with T = 1 used by both reference scenarios.
  static SpaceTimeGrid reference(int t_count, int x_count, int y_count);

  int t_count() const { return nt_; }
  int x_count() const { return nx_; }
  int y_count() const { return ny_; }
  std::size_t size() const { return static_cast<std::size_t>(nt_) * nx_ * ny_; }
  std::size_t slice_size() const { return static_cast<std::size_t>(nx_) * ny_; }

  double t_max() const { return t_max_; }
  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }

  double dt() const { return t_max_ / (nt_ - 1); }
  double hx() const { return (x_max_ - x_min_) / (nx_ - 1); }
  double hy() const { return (y_max_ - y_min_) / (ny_ - 1); }

  double t(int n) const { return n * dt(); }
  double x(int i) const { return x_min_ + i * hx(); }
  double y(int j) const { return y_min_ + j * hy(); }

  std::size_t index(int n, int i, int j) const {
    return (static_cast<std::size_t>(n) * nx_ + i) * ny_ + j;
  }

  bool on_spatial_boundary(int i, int j) const {
    return i == 0 || j == 0 || i == nx_ - 1 || j == ny_ - 1;
  }

  // Per-axis trapezoidal weights.
  double weight_t(int n) const { return (n == 0 || n == nt_ - 1) ? 0.5 * dt() : dt(); }
  double weight_x(int i) const { return (i == 0 || i == nx_ - 1) ? 0.5 * hx() : hx(); }
  double weight_y(int j) const { return (j == 0 || j == ny_ - 1) ? 0.5 * hy() : hy(); }
  double weight_space(int i, int j) const { return weight_x(i) * weight_y(j); }
  double weight(int n, int i, int j) const { return weight_t(n) * weight_space(i, j); }

  // Combined tensor-product weight of every node, in storage order.
  std::vector<double> node_weights() const;

  double measure() const { return t_max_ * (x_max_ - x_min_) * (y_max_ - y_min_); }

  bool operator==(const SpaceTimeGrid& other) const = default;

 private:
  int nt_, nx_, ny_;
  double t_max_, x_min_, x_max_, y_min_, y_max_;
};

std::string describe(const SpaceTimeGrid& grid);

// Scalar values on every node of a grid.
class Field {
 public:
  explicit Field(const SpaceTimeGrid& grid, double fill = 0.0);
  Field(const SpaceTimeGrid& grid, std::vector<double> values);

  const SpaceTimeGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double operator()(int n, int i, int j) const { return values_[grid_.index(n, i, j)]; }
  double& operator()(int n, int i, int j) { return values_[grid_.index(n, i, j)]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  std::span<const double> values() const& { return values_; }
  std::span<double> values() & { return values_; }
  std::vector<double> values() && { return std::move(values_); }

  // Values of one time slice, x-major.
  std::span<const double> slice(int n) const;
  std::span<double> slice(int n);

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s);

  bool all_finite() const;

 private:
  SpaceTimeGrid grid_;
  std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

// Throws StructuralError unless both fields live on the same grid.
void require_same_grid(const Field& a, const Field& b, const char* where);

enum class NormKind { L2_DT, Linf_DT, L2t_H1x, Linft_L2x };

// Trapezoidal L2(D_T) inner product. Serial, node-ordered reduction.
double inner_product_l2(const Field& a, const Field& b);

double norm(const Field& f, NormKind kind);

// Weighted L2(D) inner product of one time slice.
double slice_inner_product(const Field& a, const Field& b, int n);

using SpaceTimeFunction = std::function<double(double t, double x, double y)>;

// Samples g on all nodes; throws DataError on a non-finite sample.
Field sample_function(const SpaceTimeGrid& grid, const SpaceTimeFunction& g);

// CSV with header "t,x,y,value", rows in storage order, 17 significant digits.
void write_field_csv(std::ostream& out, const Field& f);
Field read_field_csv(std::istream& in, const SpaceTimeGrid& grid);

}  // namespace nnpde
