#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nnpde/grid.hpp"

namespace nnpde {

enum class Activation { Tanh, Sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

double activate(Activation a, double z);
double activate_derivative(Activation a, double z);
// sup |sigma| and sup |sigma'| over the real line.
double activation_bound(Activation a);
double activation_derivative_bound(Activation a);

// Parameters per hidden unit i: output weight c, time weight w_t, space weight w = (w_x, w_y)
// and bias eta. The network is
//   g(t,x,y) = N^-beta sum_i c_i sigma(w_t_i t + w_i . (x,y) + eta_i).
struct NetParams {
  int n = 0;
  double beta = 2.0 / 3.0;
  Activation activation = Activation::Tanh;
  std::vector<double> c, w_t, eta;
  std::vector<std::array<double, 2>> w;
  std::uint64_t seed = 0;

  static constexpr int kPerNeuron = 5;
  std::size_t flat_size() const { return static_cast<std::size_t>(n) * kPerNeuron; }

  // Flat layout per neuron: c, w_t, w_x, w_y, eta.
  Eigen::VectorXd to_flat() const;
  void assign_flat(const Eigen::VectorXd& flat);

  void validate() const;
};

// One hidden unit, used by the kernel routines.
struct Neuron {
  double c, w_t, w_x, w_y, eta;
};

inline Neuron neuron(const NetParams& p, int i) {
  return {p.c[i], p.w_t[i], p.w[i][0], p.w[i][1], p.eta[i]};
}

// c ~ U([c_lo, c_hi]), w_t, w_x, w_y, eta ~ N(0, 1), drawn per neuron in that order.
struct InitDistribution {
  double c_lo = -1.0;
  double c_hi = 1.0;
  std::uint64_t seed = 0;
};

NetParams init_params(int n, double beta, const InitDistribution& dist,
                      Activation activation = Activation::Tanh);

// Draws `count` units from the distribution; the same stream as init_params.
std::vector<Neuron> sample_neurons(int count, const InitDistribution& dist);

Field eval_net(const NetParams& params, const SpaceTimeGrid& grid);

// Quadrature of grad_theta g . u_hat over D_T, in the flat layout of NetParams.
Eigen::VectorXd net_param_gradient(const NetParams& params, const Field& u_hat);

struct SpaceTimePoint {
  double t, x, y;
};

// Per-unit tangent kernel
//   sigma(z) sigma(z') + c^2 sigma'(z) sigma'(z') (t t' + x x' + y y' + 1).
double kernel_value(const Neuron& unit, Activation activation, const SpaceTimePoint& p,
                    const SpaceTimePoint& q);

struct KernelProvenance {
  enum class Kind { Empirical, MonteCarlo } kind = Kind::Empirical;
  int sample_count = 0;
  std::uint64_t seed = 0;
};

// Dense tangent kernel B(node, node') on a grid. T_B u = B diag(w) u.
struct KernelOperator {
  SpaceTimeGrid grid;
  Eigen::MatrixXd matrix;
  std::vector<double> weights;
  KernelProvenance provenance;
  // Bound on |B| from the activation bounds and the support of c.
  double linf_bound = 0.0;
};

struct KernelOptions {
  std::size_t memory_budget_bytes = std::size_t{2} << 30;
};

// Empirical kernel of the current units, averaged with weight 1/N.
KernelOperator assemble_kernel(const NetParams& params, const SpaceTimeGrid& grid,
                               const KernelOptions& options = {});
// Monte Carlo approximation of the kernel under the initialization law.
KernelOperator assemble_kernel(const InitDistribution& dist, int sample_count, Activation activation,
                               const SpaceTimeGrid& grid, const KernelOptions& options = {});

Field apply_operator(const KernelOperator& kernel, const Field& u_hat);

// Largest k_max eigenvalues of W^1/2 B W^1/2, descending.
std::vector<double> kernel_spectrum(const KernelOperator& kernel, int k_max);

// ||B||_{L2(D_T x D_T)}, which bounds the operator norm of T_B.
double weighted_frobenius_norm(const KernelOperator& kernel);

}  // namespace nnpde
