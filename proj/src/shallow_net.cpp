#include "nnpde/shallow_net.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "nnpde/errors.hpp"
#include "nnpde/net_kernels.hpp"

namespace nnpde {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "sigmoid"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + name + "' (expected tanh or sigmoid)");
}

double activate(Activation a, double z) {
  if (a == Activation::Tanh) return std::tanh(z);
  return 1.0 / (1.0 + std::exp(-z));
}

double activate_derivative(Activation a, double z) {
  if (a == Activation::Tanh) {
    const double s = std::tanh(z);
    return 1.0 - s * s;
  }
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 - s);
}

double activation_bound(Activation) { return 1.0; }
double activation_derivative_bound(Activation a) { return a == Activation::Tanh ? 1.0 : 0.25; }

Eigen::VectorXd NetParams::to_flat() const {
  Eigen::VectorXd v(flat_size());
  for (int i = 0; i < n; ++i) {
    v[5 * i + 0] = c[i];
    v[5 * i + 1] = w_t[i];
    v[5 * i + 2] = w[i][0];
    v[5 * i + 3] = w[i][1];
    v[5 * i + 4] = eta[i];
  }
  return v;
}

void NetParams::assign_flat(const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != flat_size()) {
    throw StructuralError("parameter vector has " + std::to_string(v.size()) + " entries, expected " +
                          std::to_string(flat_size()));
  }
  for (int i = 0; i < n; ++i) {
    c[i] = v[5 * i + 0];
    w_t[i] = v[5 * i + 1];
    w[i] = {v[5 * i + 2], v[5 * i + 3]};
    eta[i] = v[5 * i + 4];
  }
}

void NetParams::validate() const {
  if (n < 1) throw ConfigError("neuron count must be >= 1");
  if (!(beta > 0.5 && beta < 1.0)) {
    throw ConfigError("beta must lie strictly inside (1/2, 1), got " + std::to_string(beta));
  }
  const std::size_t un = static_cast<std::size_t>(n);
  if (c.size() != un || w_t.size() != un || w.size() != un || eta.size() != un) {
    throw StructuralError("parameter arrays do not match neuron count " + std::to_string(n));
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(c[i]) || !std::isfinite(w_t[i]) || !std::isfinite(w[i][0]) ||
        !std::isfinite(w[i][1]) || !std::isfinite(eta[i])) {
      throw DataError("non-finite parameter in neuron " + std::to_string(i));
    }
  }
}

std::vector<Neuron> sample_neurons(int count, const InitDistribution& dist) {
  if (!(dist.c_hi >= dist.c_lo)) throw ConfigError("c law needs c_lo <= c_hi");
  std::mt19937_64 rng(dist.seed);
  std::uniform_real_distribution<double> c_law(dist.c_lo, dist.c_hi);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Neuron> units(count);
  for (auto& u : units) {
    u.c = c_law(rng);
    u.w_t = normal(rng);
    u.w_x = normal(rng);
    u.w_y = normal(rng);
    u.eta = normal(rng);
  }
  return units;
}

NetParams init_params(int n, double beta, const InitDistribution& dist, Activation activation) {
  NetParams p;
  p.n = n;
  p.beta = beta;
  p.activation = activation;
  p.seed = dist.seed;
  if (n < 1) throw ConfigError("neuron count must be >= 1");
  if (!(beta > 0.5 && beta < 1.0)) {
    throw ConfigError("beta must lie strictly inside (1/2, 1), got " + std::to_string(beta));
  }
  const auto units = sample_neurons(n, dist);
  p.c.resize(n);
  p.w_t.resize(n);
  p.w.resize(n);
  p.eta.resize(n);
  for (int i = 0; i < n; ++i) {
    p.c[i] = units[i].c;
    p.w_t[i] = units[i].w_t;
    p.w[i] = {units[i].w_x, units[i].w_y};
    p.eta[i] = units[i].eta;
  }
  return p;
}

Field eval_net(const NetParams& params, const SpaceTimeGrid& grid) {
  return kernels::eval_net_parallel(params, grid);
}

Eigen::VectorXd net_param_gradient(const NetParams& params, const Field& u_hat) {
  return kernels::param_gradient_parallel(params, u_hat);
}

double kernel_value(const Neuron& u, Activation a, const SpaceTimePoint& p,
                    const SpaceTimePoint& q) {
  const double zp = u.w_t * p.t + u.w_x * p.x + u.w_y * p.y + u.eta;
  const double zq = u.w_t * q.t + u.w_x * q.x + u.w_y * q.y + u.eta;
  return activate(a, zp) * activate(a, zq) + u.c * u.c * activate_derivative(a, zp) *
                                                 activate_derivative(a, zq) *
                                                 (p.t * q.t + p.x * q.x + p.y * q.y + 1.0);
}

namespace {

void check_budget(const SpaceTimeGrid& grid, int units, const KernelOptions& options) {
  const std::size_t nodes = grid.size();
  // Dense B plus three node-by-unit feature matrices.
  const std::size_t required = sizeof(double) * (nodes * nodes + 3 * nodes * units);
  if (required > options.memory_budget_bytes) {
    throw ResourceError("kernel assembly needs " + std::to_string(required) +
                            " bytes, budget is " + std::to_string(options.memory_budget_bytes),
                        required);
  }
}

double linf_bound(Activation a, double c_max, const SpaceTimeGrid& g) {
  const double xm = std::max(std::abs(g.x_min()), std::abs(g.x_max()));
  const double ym = std::max(std::abs(g.y_min()), std::abs(g.y_max()));
  const double s = activation_bound(a), ds = activation_derivative_bound(a);
  return s * s + c_max * c_max * ds * ds * (g.t_max() * g.t_max() + xm * xm + ym * ym + 1.0);
}

KernelOperator make_operator(const std::vector<Neuron>& units, Activation a,
                             const SpaceTimeGrid& grid, double c_max, KernelProvenance prov,
                             const KernelOptions& options) {
  check_budget(grid, static_cast<int>(units.size()), options);
  KernelOperator k{grid, kernels::kernel_matrix_parallel(units, a, grid), grid.node_weights(),
                   prov, linf_bound(a, c_max, grid)};
  return k;
}

}  // namespace

KernelOperator assemble_kernel(const NetParams& params, const SpaceTimeGrid& grid,
                               const KernelOptions& options) {
  params.validate();
  std::vector<Neuron> units(params.n);
  double c_max = 0.0;
  for (int i = 0; i < params.n; ++i) {
    units[i] = neuron(params, i);
    c_max = std::max(c_max, std::abs(units[i].c));
  }
  return make_operator(units, params.activation, grid, c_max,
                       {KernelProvenance::Kind::Empirical, params.n, params.seed}, options);
}

KernelOperator assemble_kernel(const InitDistribution& dist, int sample_count, Activation activation,
                               const SpaceTimeGrid& grid, const KernelOptions& options) {
  if (sample_count < 1) throw ConfigError("Monte Carlo kernel needs at least one sample");
  check_budget(grid, sample_count, options);
  const auto units = sample_neurons(sample_count, dist);
  const double c_max = std::max(std::abs(dist.c_lo), std::abs(dist.c_hi));
  return make_operator(units, activation, grid, c_max,
                       {KernelProvenance::Kind::MonteCarlo, sample_count, dist.seed}, options);
}

Field apply_operator(const KernelOperator& kernel, const Field& u_hat) {
  if (!(u_hat.grid() == kernel.grid)) {
    throw StructuralError("apply_operator: field grid " + describe(u_hat.grid()) +
                          " does not match kernel grid " + describe(kernel.grid));
  }
  return kernels::apply_operator_parallel(kernel, u_hat);
}

std::vector<double> kernel_spectrum(const KernelOperator& kernel, int k_max) {
  const Eigen::Index nodes = kernel.matrix.rows();
  Eigen::VectorXd sw(nodes);
  for (Eigen::Index p = 0; p < nodes; ++p) sw[p] = std::sqrt(kernel.weights[p]);
  const Eigen::MatrixXd sym = sw.asDiagonal() * kernel.matrix * sw.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("kernel eigensolver did not converge");
  std::vector<double> ev(solver.eigenvalues().data(), solver.eigenvalues().data() + nodes);
  std::sort(ev.begin(), ev.end(), std::greater<>());
  if (k_max >= 0 && static_cast<std::size_t>(k_max) < ev.size()) ev.resize(k_max);
  return ev;
}

double weighted_frobenius_norm(const KernelOperator& kernel) {
  const Eigen::Index nodes = kernel.matrix.rows();
  double s = 0.0;
  for (Eigen::Index q = 0; q < nodes; ++q) {
    double col = 0.0;
    for (Eigen::Index p = 0; p < nodes; ++p) {
      const double b = kernel.matrix(p, q);
      col += kernel.weights[p] * b * b;
    }
    s += kernel.weights[q] * col;
  }
  return std::sqrt(s);
}

}  // namespace nnpde
