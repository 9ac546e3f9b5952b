#pragma once

#include <Eigen/SparseCore>
#include <functional>
#include <memory>
#include <vector>

#include "nnpde/grid.hpp"

namespace nnpde {

struct SymMatrix2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
  double min_eigenvalue() const;
};

struct Vector2 {
  double x = 0.0, y = 0.0;
};

// q(t,x,y,u) together with its first two u-derivatives.
struct Nonlinearity {
  using Fn = std::function<double(double t, double x, double y, double u)>;
  Fn value, du, duu;

  static Nonlinearity zero();
  // q(u) = u^3 - u
  static Nonlinearity allen_cahn();
};

// Coefficients of  du/dt + L u - q(u) = g  with
//   L u = -div(a grad u) + b . grad u + c u,
// zero Dirichlet data on the spatial boundary and u(0) = f.
struct PdeProblem {
  std::function<SymMatrix2(double t, double x, double y)> diffusion;
  std::function<Vector2(double t, double x, double y)> drift;
  std::function<double(double t, double x, double y)> reaction;
  Nonlinearity q;
  std::function<double(double x, double y)> initial;
  // When false a single factorization of the implicit operator serves every step.
  bool time_dependent = false;

  // a = nu I, b = 0, c = 0, q = 0, f = 0.
  static PdeProblem isotropic(double nu);
};

struct ForwardSolution {
  Field u;
};

struct SecondLevelSolution {
  Field w_hat;
  Field v_hat;
};

// IMEX finite-difference solver on one grid:
//   (I + dt A^{n+1}) u^{n+1} = u^n + dt (q(t_n, u^n) + g^{n+1}),
// A the flux-differenced discretization of L on interior nodes. All implicit operators are
// factorized at construction, so a solver is immutable afterwards and can be shared.
//
// The adjoint routines are exact transposes of the discrete forward map. An adjoint field
// returned here is the gradient of the discrete functional with respect to the source
// values, divided by the quadrature weight of each node, so that
//   dJ = inner_product_l2(u_hat, dg)
// holds exactly for every source perturbation dg.
class ParabolicSolver {
 public:
  ParabolicSolver(PdeProblem problem, const SpaceTimeGrid& grid);
  ~ParabolicSolver();
  ParabolicSolver(ParabolicSolver&&) noexcept;
  ParabolicSolver& operator=(ParabolicSolver&&) noexcept;

  const SpaceTimeGrid& grid() const { return grid_; }
  const PdeProblem& problem() const { return problem_; }

  ForwardSolution forward(const Field& g) const;

  // Adjoint with source `residual` (u - h for the loss gradient).
  Field adjoint(const ForwardSolution& fwd, const Field& residual) const;

  // Directional derivative of g -> u at the stored trajectory, with q_u frozen there.
  Field tangent(const ForwardSolution& fwd, const Field& source) const;

  // w_hat = tangent(source_w); v_hat the adjoint driven by w_hat + q_uu(u) u_hat w_hat.
  SecondLevelSolution second_level(const ForwardSolution& fwd, const Field& u_hat,
                                   const Field& source_w) const;

  // q_u(t,x,y,u(t,x,y)) on every node.
  Field linearize_at(const Field& u) const;

  // Discretized L at time level n restricted to interior nodes, (nx-2)(ny-2) square.
  Eigen::SparseMatrix<double> spatial_operator(int n) const;
  // I + dt A^n.
  Eigen::SparseMatrix<double> implicit_operator(int n) const;

 private:
  struct Factorizations;

  using Levels = std::vector<Eigen::VectorXd>;
  Levels backward(const ForwardSolution& fwd, const Levels& sources) const;
  Field adjoint_field(const Levels& lambda) const;
  Eigen::VectorXd interior(std::span<const double> slice) const;
  void scatter(const Eigen::VectorXd& v, std::span<double> slice) const;
  Eigen::VectorXd weighted_interior(const Field& f, int n) const;

  PdeProblem problem_;
  SpaceTimeGrid grid_;
  std::unique_ptr<Factorizations> lu_;
};

ForwardSolution solve_forward(const PdeProblem& problem, const Field& g, const SpaceTimeGrid& grid);
Field solve_adjoint(const PdeProblem& problem, const ForwardSolution& u, const Field& residual);
SecondLevelSolution solve_second_level(const PdeProblem& problem, const ForwardSolution& u,
                                       const Field& u_hat, const Field& source_w);
Field linearize_at(const PdeProblem& problem, const Field& u);

}  // namespace nnpde
