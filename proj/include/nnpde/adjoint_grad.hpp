#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nnpde/grid.hpp"
#include "nnpde/pde.hpp"
#include "nnpde/shallow_net.hpp"

namespace nnpde {

struct LossReport {
  double j = 0.0;
  // sqrt(2 j) / h_linf
  double rmse_rel = 0.0;
  double h_linf = 0.0;
};

// J = 1/2 (u - h, u - h)_{L2(D_T)}.
LossReport compute_loss(const Field& u, const Field& h);
LossReport compute_loss(const Field& u, const Field& h, double h_linf);

// A PDE problem bound to a grid and a fixed target h. ||h||_inf is cached here.
class Calibration {
 public:
  Calibration(PdeProblem problem, const SpaceTimeGrid& grid, Field target);

  const ParabolicSolver& solver() const { return solver_; }
  const SpaceTimeGrid& grid() const { return solver_.grid(); }
  const Field& target() const { return target_; }
  double target_linf() const { return target_linf_; }

 private:
  ParabolicSolver solver_;
  Field target_;
  double target_linf_;
};

struct GradientResult {
  Eigen::VectorXd grad;
  LossReport report;
  Field g;
  Field u;
  Field u_hat;
};

// eval_net -> forward solve -> residual u - h -> adjoint -> parameter quadrature.
// The result is the exact gradient of the discrete loss.
GradientResult gradient(const Calibration& cal, const NetParams& params);

LossReport evaluate_loss(const Calibration& cal, const NetParams& params);

struct GradCheckEntry {
  double adjoint = 0.0;
  double fd = 0.0;       // central difference with the requested step
  double fd_half = 0.0;  // same with half the step
  double rel_error = 0.0;
};

// Central finite differences of the discrete loss, one parameter at a time.
std::vector<GradCheckEntry> gradient_check(const Calibration& cal, const NetParams& params,
                                           double step = 1e-5);

}  // namespace nnpde
