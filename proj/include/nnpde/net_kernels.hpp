#pragma once

// Data-parallel kernels behind the shallow network routines. Every OpenMP kernel has a
// serial reference written directly from the definitions; tests compare the two and
// bench_kernels times them.
//
// Reductions are ordered so that results do not depend on the thread count:
//   eval      parallel over (t, x) rows, each node sums units in index order;
//   gradient  parallel over units, each unit sums nodes in storage order;
//   kernel    parallel over row blocks of B, entries mirrored from the lower triangle;
//   operator  parallel over rows, each row a storage-order dot product.

#include <Eigen/Dense>
#include <vector>

#include "nnpde/shallow_net.hpp"

namespace nnpde::kernels {

Field eval_net_parallel(const NetParams& params, const SpaceTimeGrid& grid);
Field eval_net_serial(const NetParams& params, const SpaceTimeGrid& grid);

Eigen::VectorXd param_gradient_parallel(const NetParams& params, const Field& u_hat);
Eigen::VectorXd param_gradient_serial(const NetParams& params, const Field& u_hat);

// Mean of kernel_value over `units` on every pair of grid nodes.
Eigen::MatrixXd kernel_matrix_parallel(const std::vector<Neuron>& units, Activation activation,
                                       const SpaceTimeGrid& grid);
Eigen::MatrixXd kernel_matrix_serial(const std::vector<Neuron>& units, Activation activation,
                                     const SpaceTimeGrid& grid);

Field apply_operator_parallel(const KernelOperator& kernel, const Field& u_hat);
Field apply_operator_serial(const KernelOperator& kernel, const Field& u_hat);

}  // namespace nnpde::kernels
