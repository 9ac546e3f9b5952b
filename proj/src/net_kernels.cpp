#include "nnpde/net_kernels.hpp"

#include <cmath>

#include "nnpde/errors.hpp"

namespace nnpde::kernels {

namespace {

// On a tensor grid the pre-activation z = w_t t + w_x x + w_y y + eta separates, so exp(k z)
// is a product of per-axis factors. Both activations are rational in exp(k z):
//   tanh(z)    = 1 - 2 / (1 + e^{2z}),
//   sigmoid(z) = 1 / (1 + e^{-z}).
// Units whose exponent could leave [-kMaxExponent, kMaxExponent] fall back to direct
// evaluation.
constexpr double kMaxExponent = 300.0;

constexpr double exponent_scale(Activation a) { return a == Activation::Tanh ? 2.0 : -1.0; }

struct UnitTable {
  bool separable = false;
  std::vector<double> et, ex, ey;  // et includes the bias factor
};

UnitTable make_table(const Neuron& u, Activation a, const SpaceTimeGrid& g) {
  const double k = exponent_scale(a);
  const double xm = std::max(std::abs(g.x_min()), std::abs(g.x_max()));
  const double ym = std::max(std::abs(g.y_min()), std::abs(g.y_max()));
  const double bound = std::abs(k) * (std::abs(u.w_t) * g.t_max() + std::abs(u.eta) +
                                      std::abs(u.w_x) * xm + std::abs(u.w_y) * ym);
  UnitTable tab;
  tab.separable = bound <= kMaxExponent;
  if (!tab.separable) return tab;
  tab.et.resize(g.t_count());
  tab.ex.resize(g.x_count());
  tab.ey.resize(g.y_count());
  for (int n = 0; n < g.t_count(); ++n) tab.et[n] = std::exp(k * (u.w_t * g.t(n) + u.eta));
  for (int i = 0; i < g.x_count(); ++i) tab.ex[i] = std::exp(k * u.w_x * g.x(i));
  for (int j = 0; j < g.y_count(); ++j) tab.ey[j] = std::exp(k * u.w_y * g.y(j));
  return tab;
}

template <Activation A>
inline double sigma_from_exp(double e) {
  if constexpr (A == Activation::Tanh) {
    return 1.0 - 2.0 / (1.0 + e);
  } else {
    return 1.0 / (1.0 + e);
  }
}

template <Activation A>
inline double dsigma_from_sigma(double s) {
  if constexpr (A == Activation::Tanh) {
    return 1.0 - s * s;
  } else {
    return s * (1.0 - s);
  }
}

double pre_activation(const Neuron& u, double t, double x, double y) {
  return u.w_t * t + u.w_x * x + u.w_y * y + u.eta;
}

std::vector<UnitTable> make_tables(const std::vector<Neuron>& units, Activation a,
                                   const SpaceTimeGrid& g) {
  std::vector<UnitTable> tabs(units.size());
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < units.size(); ++k) tabs[k] = make_table(units[k], a, g);
  return tabs;
}

std::vector<Neuron> units_of(const NetParams& p) {
  std::vector<Neuron> units(p.n);
  for (int i = 0; i < p.n; ++i) units[i] = neuron(p, i);
  return units;
}

template <Activation A>
void eval_rows(const std::vector<Neuron>& units, const std::vector<UnitTable>& tabs, double scale,
               const SpaceTimeGrid& g, std::span<double> out) {
  const int nx = g.x_count(), ny = g.y_count();
  const int rows = g.t_count() * nx;
#pragma omp parallel for schedule(static)
  for (int row = 0; row < rows; ++row) {
    const int n = row / nx, i = row % nx;
    double* dst = out.data() + static_cast<std::size_t>(row) * ny;
    for (std::size_t k = 0; k < units.size(); ++k) {
      const double coef = scale * units[k].c;
      if (coef == 0.0) continue;
      const UnitTable& tab = tabs[k];
      if (tab.separable) {
        const double base = tab.et[n] * tab.ex[i];
        const double* ey = tab.ey.data();
#pragma omp simd
        for (int j = 0; j < ny; ++j) dst[j] += coef * sigma_from_exp<A>(base * ey[j]);
      } else {
        for (int j = 0; j < ny; ++j)
          dst[j] += coef * activate(A, pre_activation(units[k], g.t(n), g.x(i), g.y(j)));
      }
    }
  }
}

struct UnitSums {
  double s = 0, d = 0, dt = 0, dx = 0, dy = 0;
};

template <Activation A>
UnitSums unit_sums(const Neuron& u, const UnitTable& tab, const SpaceTimeGrid& g,
                   const std::vector<double>& r, const std::vector<char>& row_active) {
  const int nx = g.x_count(), ny = g.y_count();
  UnitSums out;
  for (int n = 0; n < g.t_count(); ++n) {
    for (int i = 0; i < nx; ++i) {
      const int row = n * nx + i;
      if (!row_active[row]) continue;
      const double* rr = r.data() + static_cast<std::size_t>(row) * ny;
      double rs = 0, rd = 0, rdy = 0;
      if (tab.separable) {
        const double base = tab.et[n] * tab.ex[i];
        const double* ey = tab.ey.data();
#pragma omp simd reduction(+ : rs, rd, rdy)
        for (int j = 0; j < ny; ++j) {
          const double s = sigma_from_exp<A>(base * ey[j]);
          const double d = dsigma_from_sigma<A>(s);
          rs += rr[j] * s;
          rd += rr[j] * d;
          rdy += rr[j] * d * g.y(j);
        }
      } else {
        for (int j = 0; j < ny; ++j) {
          const double z = pre_activation(u, g.t(n), g.x(i), g.y(j));
          const double s = activate(A, z);
          const double d = activate_derivative(A, z);
          rs += rr[j] * s;
          rd += rr[j] * d;
          rdy += rr[j] * d * g.y(j);
        }
      }
      out.s += rs;
      out.d += rd;
      out.dt += g.t(n) * rd;
      out.dx += g.x(i) * rd;
      out.dy += rdy;
    }
  }
  return out;
}

template <Activation A>
void fill_features(const std::vector<Neuron>& units, const std::vector<UnitTable>& tabs,
                   const SpaceTimeGrid& g, Eigen::MatrixXd& s, Eigen::MatrixXd& dc,
                   Eigen::MatrixXd& d) {
  const int nx = g.x_count(), ny = g.y_count();
  const Eigen::Index m = static_cast<Eigen::Index>(units.size());
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < m; ++k) {
    const Neuron& u = units[k];
    const UnitTable& tab = tabs[k];
    for (int n = 0; n < g.t_count(); ++n)
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
          const Eigen::Index p = static_cast<Eigen::Index>(g.index(n, i, j));
          double sv, dv;
          if (tab.separable) {
            sv = sigma_from_exp<A>(tab.et[n] * tab.ex[i] * tab.ey[j]);
            dv = dsigma_from_sigma<A>(sv);
          } else {
            const double z = pre_activation(u, g.t(n), g.x(i), g.y(j));
            sv = activate(A, z);
            dv = activate_derivative(A, z);
          }
          s(p, k) = sv;
          d(p, k) = dv;
          dc(p, k) = u.c * u.c * dv;
        }
  }
}

}  // namespace

Field eval_net_parallel(const NetParams& params, const SpaceTimeGrid& grid) {
  Field out(grid);
  const auto units = units_of(params);
  const auto tabs = make_tables(units, params.activation, grid);
  const double scale = std::pow(static_cast<double>(params.n), -params.beta);
  if (params.activation == Activation::Tanh)
    eval_rows<Activation::Tanh>(units, tabs, scale, grid, out.values());
  else
    eval_rows<Activation::Sigmoid>(units, tabs, scale, grid, out.values());
  return out;
}

Field eval_net_serial(const NetParams& params, const SpaceTimeGrid& grid) {
  Field out(grid);
  const double scale = std::pow(static_cast<double>(params.n), -params.beta);
  for (int n = 0; n < grid.t_count(); ++n)
    for (int i = 0; i < grid.x_count(); ++i)
      for (int j = 0; j < grid.y_count(); ++j) {
        double sum = 0.0;
        for (int k = 0; k < params.n; ++k) {
          const Neuron u = neuron(params, k);
          if (u.c == 0.0) continue;
          sum += scale * u.c *
                 activate(params.activation, pre_activation(u, grid.t(n), grid.x(i), grid.y(j)));
        }
        out(n, i, j) = sum;
      }
  return out;
}

Eigen::VectorXd param_gradient_parallel(const NetParams& params, const Field& u_hat) {
  const SpaceTimeGrid& g = u_hat.grid();
  const int nx = g.x_count(), ny = g.y_count();
  std::vector<double> r(g.size());
  std::vector<char> row_active(static_cast<std::size_t>(g.t_count()) * nx, 0);
  for (int n = 0; n < g.t_count(); ++n)
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j) {
        const std::size_t p = g.index(n, i, j);
        r[p] = g.weight(n, i, j) * u_hat[p];
        if (r[p] != 0.0) row_active[n * nx + i] = 1;
      }

  const auto units = units_of(params);
  const auto tabs = make_tables(units, params.activation, g);
  const double scale = std::pow(static_cast<double>(params.n), -params.beta);
  Eigen::VectorXd grad(params.flat_size());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < params.n; ++k) {
    const UnitSums s = params.activation == Activation::Tanh
                           ? unit_sums<Activation::Tanh>(units[k], tabs[k], g, r, row_active)
                           : unit_sums<Activation::Sigmoid>(units[k], tabs[k], g, r, row_active);
    const double c = units[k].c;
    grad[5 * k + 0] = scale * s.s;
    grad[5 * k + 1] = scale * c * s.dt;
    grad[5 * k + 2] = scale * c * s.dx;
    grad[5 * k + 3] = scale * c * s.dy;
    grad[5 * k + 4] = scale * c * s.d;
  }
  return grad;
}

Eigen::VectorXd param_gradient_serial(const NetParams& params, const Field& u_hat) {
  const SpaceTimeGrid& g = u_hat.grid();
  const double scale = std::pow(static_cast<double>(params.n), -params.beta);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.flat_size());
  for (int k = 0; k < params.n; ++k) {
    const Neuron u = neuron(params, k);
    double gc = 0, gt = 0, gx = 0, gy = 0, ge = 0;
    for (int n = 0; n < g.t_count(); ++n)
      for (int i = 0; i < g.x_count(); ++i)
        for (int j = 0; j < g.y_count(); ++j) {
          const double r = g.weight(n, i, j) * u_hat(n, i, j);
          const double z = pre_activation(u, g.t(n), g.x(i), g.y(j));
          const double d = activate_derivative(params.activation, z);
          gc += r * activate(params.activation, z);
          gt += r * d * g.t(n);
          gx += r * d * g.x(i);
          gy += r * d * g.y(j);
          ge += r * d;
        }
    grad[5 * k + 0] = scale * gc;
    grad[5 * k + 1] = scale * u.c * gt;
    grad[5 * k + 2] = scale * u.c * gx;
    grad[5 * k + 3] = scale * u.c * gy;
    grad[5 * k + 4] = scale * u.c * ge;
  }
  return grad;
}

Eigen::MatrixXd kernel_matrix_parallel(const std::vector<Neuron>& units, Activation activation,
                                       const SpaceTimeGrid& grid) {
  const Eigen::Index nodes = static_cast<Eigen::Index>(grid.size());
  const Eigen::Index m = static_cast<Eigen::Index>(units.size());
  if (m == 0) throw ConfigError("kernel assembly needs at least one unit");
  Eigen::MatrixXd s(nodes, m), dc(nodes, m), d(nodes, m);
  const auto tabs = make_tables(units, activation, grid);
  if (activation == Activation::Tanh)
    fill_features<Activation::Tanh>(units, tabs, grid, s, dc, d);
  else
    fill_features<Activation::Sigmoid>(units, tabs, grid, s, dc, d);

  // Geometric factor t t' + x x' + y y' + 1 does not depend on the unit.
  Eigen::MatrixXd coords(nodes, 4);
  for (int n = 0; n < grid.t_count(); ++n)
    for (int i = 0; i < grid.x_count(); ++i)
      for (int j = 0; j < grid.y_count(); ++j) {
        const Eigen::Index p = static_cast<Eigen::Index>(grid.index(n, i, j));
        coords.row(p) << grid.t(n), grid.x(i), grid.y(j), 1.0;
      }

  Eigen::MatrixXd b(nodes, nodes);
  constexpr Eigen::Index kBlock = 64;
  const Eigen::Index blocks = (nodes + kBlock - 1) / kBlock;
  const double inv_m = 1.0 / static_cast<double>(m);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index r0 = blk * kBlock;
    const Eigen::Index len = std::min(kBlock, nodes - r0);
    // Lower triangle only: columns [0, r0 + len).
    const Eigen::Index cols = r0 + len;
    Eigen::MatrixXd first = s.middleRows(r0, len) * s.topRows(cols).transpose();
    Eigen::MatrixXd second = dc.middleRows(r0, len) * d.topRows(cols).transpose();
    Eigen::MatrixXd geom = coords.middleRows(r0, len) * coords.topRows(cols).transpose();
    b.block(r0, 0, len, cols) = inv_m * (first.array() + geom.array() * second.array()).matrix();
  }
  for (Eigen::Index p = 0; p < nodes; ++p)
    for (Eigen::Index q = p + 1; q < nodes; ++q) b(p, q) = b(q, p);
  return b;
}

Eigen::MatrixXd kernel_matrix_serial(const std::vector<Neuron>& units, Activation activation,
                                     const SpaceTimeGrid& grid) {
  const Eigen::Index nodes = static_cast<Eigen::Index>(grid.size());
  if (units.empty()) throw ConfigError("kernel assembly needs at least one unit");
  std::vector<SpaceTimePoint> pts(grid.size());
  for (int n = 0; n < grid.t_count(); ++n)
    for (int i = 0; i < grid.x_count(); ++i)
      for (int j = 0; j < grid.y_count(); ++j)
        pts[grid.index(n, i, j)] = {grid.t(n), grid.x(i), grid.y(j)};
  Eigen::MatrixXd b(nodes, nodes);
  for (Eigen::Index p = 0; p < nodes; ++p)
    for (Eigen::Index q = 0; q < nodes; ++q) {
      double sum = 0.0;
      for (const Neuron& u : units) sum += kernel_value(u, activation, pts[p], pts[q]);
      b(p, q) = sum / static_cast<double>(units.size());
    }
  return b;
}

Field apply_operator_parallel(const KernelOperator& kernel, const Field& u_hat) {
  const Eigen::Index nodes = kernel.matrix.rows();
  Eigen::VectorXd v(nodes);
  for (Eigen::Index p = 0; p < nodes; ++p) v[p] = kernel.weights[p] * u_hat[p];
  Field out(kernel.grid);
  // B is symmetric, so row p is column p and the dot product is contiguous.
#pragma omp parallel for schedule(static)
  for (Eigen::Index p = 0; p < nodes; ++p) out[p] = kernel.matrix.col(p).dot(v);
  return out;
}

Field apply_operator_serial(const KernelOperator& kernel, const Field& u_hat) {
  const Eigen::Index nodes = kernel.matrix.rows();
  Field out(kernel.grid);
  for (Eigen::Index p = 0; p < nodes; ++p) {
    double sum = 0.0;
    for (Eigen::Index q = 0; q < nodes; ++q)
      sum += kernel.matrix(p, q) * kernel.weights[q] * u_hat[q];
    out[p] = sum;
  }
  return out;
}

}  // namespace nnpde::kernels
