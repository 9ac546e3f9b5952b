#include "nnpde/adjoint_grad.hpp"

#include <cmath>

#include "nnpde/errors.hpp"

namespace nnpde {

LossReport compute_loss(const Field& u, const Field& h) {
  return compute_loss(u, h, norm(h, NormKind::Linf_DT));
}

LossReport compute_loss(const Field& u, const Field& h, double h_linf) {
  require_same_grid(u, h, "compute_loss");
  const Field r = u - h;
  LossReport rep;
  rep.j = 0.5 * inner_product_l2(r, r);
  rep.h_linf = h_linf;
  rep.rmse_rel = h_linf > 0.0 ? std::sqrt(2.0 * rep.j) / h_linf : 0.0;
  return rep;
}

Calibration::Calibration(PdeProblem problem, const SpaceTimeGrid& grid, Field target)
    : solver_(std::move(problem), grid),
      target_(std::move(target)),
      target_linf_(norm(target_, NormKind::Linf_DT)) {
  if (!(target_.grid() == grid)) {
    throw StructuralError("target grid " + describe(target_.grid()) + " differs from " +
                          describe(grid));
  }
  if (!target_.all_finite()) throw DataError("target field has non-finite values");
}

GradientResult gradient(const Calibration& cal, const NetParams& params) {
  Field g = eval_net(params, cal.grid());
  ForwardSolution fwd = cal.solver().forward(g);
  LossReport rep = compute_loss(fwd.u, cal.target(), cal.target_linf());
  Field u_hat = cal.solver().adjoint(fwd, fwd.u - cal.target());
  Eigen::VectorXd grad = net_param_gradient(params, u_hat);
  return {std::move(grad), rep, std::move(g), std::move(fwd.u), std::move(u_hat)};
}

LossReport evaluate_loss(const Calibration& cal, const NetParams& params) {
  const ForwardSolution fwd = cal.solver().forward(eval_net(params, cal.grid()));
  return compute_loss(fwd.u, cal.target(), cal.target_linf());
}

std::vector<GradCheckEntry> gradient_check(const Calibration& cal, const NetParams& params,
                                           double step) {
  const GradientResult res = gradient(cal, params);
  const Eigen::VectorXd theta = params.to_flat();
  NetParams probe = params;
  auto central = [&](Eigen::Index k, double h) {
    Eigen::VectorXd v = theta;
    v[k] = theta[k] + h;
    probe.assign_flat(v);
    const double jp = evaluate_loss(cal, probe).j;
    v[k] = theta[k] - h;
    probe.assign_flat(v);
    const double jm = evaluate_loss(cal, probe).j;
    return (jp - jm) / (2.0 * h);
  };
  std::vector<GradCheckEntry> out(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    GradCheckEntry& e = out[k];
    e.adjoint = res.grad[k];
    e.fd = central(k, step);
    e.fd_half = central(k, 0.5 * step);
    const double denom = std::max({std::abs(e.adjoint), std::abs(e.fd), 1e-300});
    e.rel_error = std::abs(e.adjoint - e.fd) / denom;
  }
  return out;
}

}  // namespace nnpde
