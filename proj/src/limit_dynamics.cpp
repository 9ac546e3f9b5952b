#include "nnpde/limit_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "nnpde/errors.hpp"

namespace nnpde {

namespace {

// Smooth random fields: a few separable sine/cosine modes with Gaussian amplitudes.
std::vector<Field> make_test_fields(const SpaceTimeGrid& grid, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> amp(0.0, 1.0);
  std::uniform_int_distribution<int> freq(1, 3);
  const double pi = std::numbers::pi;
  const double lx = grid.x_max() - grid.x_min(), ly = grid.y_max() - grid.y_min();
  std::vector<Field> out;
  for (int m = 0; m < count; ++m) {
    struct Mode {
      double a;
      int p, q, r;
    };
    std::vector<Mode> modes(4);
    for (auto& md : modes) {
      md.a = amp(rng);
      md.p = freq(rng);
      md.q = freq(rng);
      md.r = freq(rng) - 1;
    }
    out.push_back(sample_function(grid, [&](double t, double x, double y) {
      double s = 0.0;
      for (const auto& md : modes) {
        s += md.a * std::sin(md.p * pi * (x - grid.x_min()) / lx) *
             std::sin(md.q * pi * (y - grid.y_min()) / ly) * std::cos(md.r * pi * t / grid.t_max());
      }
      return s;
    }));
  }
  return out;
}

std::string at_tau(double tau) {
  std::ostringstream s;
  s << " (training time tau = " << tau << ")";
  return s.str();
}

void check_checkpoints(const std::vector<int>& checkpoints) {
  if (checkpoints.empty()) throw ConfigError("at least one checkpoint is required");
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    if (checkpoints[k] < 0 || (k > 0 && checkpoints[k] <= checkpoints[k - 1])) {
      throw ConfigError("checkpoints must be non-negative and strictly increasing");
    }
  }
}

}  // namespace

LimitState make_limit_state(const Calibration& cal, std::shared_ptr<const KernelOperator> kernel,
                            const LimitOptions& options) {
  if (!kernel) throw ConfigError("limit flow needs a kernel");
  if (!(kernel->grid == cal.grid())) {
    throw StructuralError("kernel grid " + describe(kernel->grid) + " differs from problem grid " +
                          describe(cal.grid()));
  }
  if (options.test_fields < 0) throw ConfigError("test_fields must be >= 0");
  LimitState s{Field(cal.grid()), 0.0, 0, std::move(kernel), {}, {}};
  s.test_fields = make_test_fields(cal.grid(), options.test_fields, options.test_seed);
  return s;
}

void limit_step(LimitState& state, const Calibration& cal, double dtau, const Schedule& schedule,
                const LimitOptions& options) {
  if (!(dtau > 0.0)) throw ConfigError("dtau must be positive");
  const ParabolicSolver& solver = cal.solver();
  LimitRecord rec;
  rec.tau = state.tau;
  rec.rate = schedule.rate_at_tau(state.tau);
  Field t_uhat(cal.grid());
  try {
    const ForwardSolution fwd = solver.forward(state.g_star);
    const Field residual = fwd.u - cal.target();
    const Field u_hat = solver.adjoint(fwd, residual);
    t_uhat = apply_operator(*state.kernel, u_hat);
    rec.j = 0.5 * inner_product_l2(residual, residual);
    rec.q = inner_product_l2(u_hat, t_uhat);
    rec.norm_uhat_l2 = norm(u_hat, NormKind::L2_DT);
    rec.norm_uhat_linf_l2 = norm(u_hat, NormKind::Linft_L2x);
    for (const Field& phi : state.test_fields) {
      rec.weak_pairings.push_back(std::abs(inner_product_l2(phi, u_hat)));
    }
    if (options.second_level) {
      const SecondLevelSolution sl = solver.second_level(fwd, u_hat, 2.0 * t_uhat);
      rec.norm_vhat_l2 = norm(sl.v_hat, NormKind::L2_DT);
      rec.norm_what_linf = norm(sl.w_hat, NormKind::Linf_DT);
      rec.dq_adjoint = -rec.rate * inner_product_l2(t_uhat, sl.v_hat);
    }
  } catch (const NumericalError& e) {
    throw NumericalError(e.what() + at_tau(state.tau), e.time_index());
  }
  state.history.push_back(std::move(rec));
  t_uhat *= -dtau * state.history.back().rate;
  state.g_star += t_uhat;
  state.tau += dtau;
  ++state.steps;
}

void run_limit(LimitState& state, const Calibration& cal, double dtau, int steps,
               const Schedule& schedule, const LimitOptions& options) {
  for (int k = 0; k < steps; ++k) limit_step(state, cal, dtau, schedule, options);
}

DecayCheck check_decay_identity(const std::vector<LimitRecord>& history) {
  if (history.size() < 3) throw ConfigError("decay check needs at least 3 history entries");
  const double dtau = history[1].tau - history[0].tau;
  for (std::size_t k = 1; k < history.size(); ++k) {
    const double d = history[k].tau - history[k - 1].tau;
    if (!(std::abs(d - dtau) <= 1e-9 * std::max(1.0, std::abs(dtau)))) {
      throw ConfigError("decay check needs a uniform dtau");
    }
  }
  DecayCheck out;
  for (std::size_t k = 1; k + 1 < history.size(); ++k) {
    const double fd = (history[k + 1].j - history[k - 1].j) / (2.0 * dtau);
    const double pred = -history[k].rate * history[k].q;
    out.fd.push_back(fd);
    out.predicted.push_back(pred);
    double rel = 0.0;
    if (pred != 0.0) {
      rel = std::abs(fd - pred) / std::abs(pred);
    } else if (fd != 0.0) {
      rel = std::numeric_limits<double>::infinity();
    }
    out.max_rel_discrepancy = std::max(out.max_rel_discrepancy, rel);
  }
  return out;
}

RegularityCheck check_regularity_bound(const std::vector<LimitRecord>& history,
                                       double kernel_frobenius, const Schedule& schedule) {
  if (history.size() < 2) throw ConfigError("regularity check needs at least 2 history entries");
  double max_uhat = 0.0, max_vhat = 0.0;
  for (const auto& r : history) {
    if (std::isnan(r.norm_vhat_l2)) {
      throw ConfigError("regularity check needs second-level quantities in the history");
    }
    max_uhat = std::max(max_uhat, r.norm_uhat_l2);
    max_vhat = std::max(max_vhat, r.norm_vhat_l2);
  }
  RegularityCheck out;
  out.l_q = kernel_frobenius * max_uhat * max_vhat;
  for (std::size_t a = 0; a < history.size(); ++a) {
    for (std::size_t b = a + 1; b < history.size(); ++b) {
      const double lhs = std::abs(history[b].q - history[a].q);
      const double rhs = out.l_q * schedule.integral(history[a].tau, history[b].tau);
      ++out.pairs;
      if (lhs > rhs) out.holds = false;
      if (rhs > 0.0) {
        out.max_ratio = std::max(out.max_ratio, lhs / rhs);
      } else if (lhs > 0.0) {
        out.max_ratio = std::numeric_limits<double>::infinity();
      }
    }
  }
  for (std::size_t k = 1; k + 1 < history.size(); ++k) {
    const double fd = (history[k + 1].q - history[k - 1].q) / (history[k + 1].tau - history[k - 1].tau);
    const double adj = history[k].dq_adjoint;
    const double denom = std::max(std::abs(adj), std::abs(fd));
    if (denom > 0.0) out.max_dq_rel_error = std::max(out.max_dq_rel_error, std::abs(fd - adj) / denom);
  }
  return out;
}

void write_history_csv(std::ostream& out, const std::vector<LimitRecord>& history) {
  const auto old = out.precision(17);
  out << "tau,J,Q,norm_uhat_L2,rate\n";
  for (const auto& r : history) {
    out << r.tau << ',' << r.j << ',' << r.q << ',' << r.norm_uhat_l2 << ',' << r.rate << '\n';
  }
  out.precision(old);
}

TrajectorySnapshot evaluate_snapshot(const Calibration& cal, const Field& g, int step, double tau) {
  ForwardSolution fwd = cal.solver().forward(g);
  Field u_hat = cal.solver().adjoint(fwd, fwd.u - cal.target());
  return {step, tau, std::move(fwd.u), std::move(u_hat), g};
}

double TrajectoryDistance::operator[](int k) const {
  switch (k) {
    case 0: return u_l2h1;
    case 1: return u_linfl2;
    case 2: return uhat_l2h1;
    case 3: return uhat_linfl2;
    default: return g_l2;
  }
}

TrajectoryDistance trajectory_distance(const TrajectorySnapshot& a, const TrajectorySnapshot& b) {
  const Field du = a.u - b.u, dh = a.u_hat - b.u_hat, dg = a.g - b.g;
  return {norm(du, NormKind::L2t_H1x), norm(du, NormKind::Linft_L2x),
          norm(dh, NormKind::L2t_H1x), norm(dh, NormKind::Linft_L2x), norm(dg, NormKind::L2_DT)};
}

std::vector<TrajectorySnapshot> limit_snapshots(const Calibration& cal,
                                                std::shared_ptr<const KernelOperator> kernel,
                                                const ScheduleConfig& schedule,
                                                const std::vector<int>& checkpoints) {
  check_checkpoints(checkpoints);
  const Schedule sched(schedule);
  LimitOptions opts;
  opts.test_fields = 0;
  LimitState state = make_limit_state(cal, std::move(kernel), opts);
  std::vector<TrajectorySnapshot> out;
  for (int cp : checkpoints) {
    while (state.steps < cp) limit_step(state, cal, schedule.dtau, sched, opts);
    out.push_back(evaluate_snapshot(cal, state.g_star, state.steps, state.tau));
  }
  return out;
}

std::vector<TrajectorySnapshot> finite_snapshots(const Calibration& cal, NetParams params,
                                                 const ScheduleConfig& schedule,
                                                 const std::vector<int>& checkpoints) {
  check_checkpoints(checkpoints);
  params.validate();
  const Schedule sched(schedule);
  Eigen::VectorXd theta = params.to_flat();
  std::vector<TrajectorySnapshot> out;
  std::size_t next = 0;
  for (int step = 0; next < checkpoints.size(); ++step) {
    const double tau = step * schedule.dtau;
    GradientResult res = gradient(cal, params);
    if (step == checkpoints[next]) {
      out.push_back({step, tau, std::move(res.u), std::move(res.u_hat), std::move(res.g)});
      ++next;
      if (next == checkpoints.size()) break;
    }
    const double rate = schedule.dtau * scaled_rate(sched.rate_at_tau(tau), params.n, params.beta);
    theta -= rate * res.grad;
    params.assign_flat(theta);
  }
  return out;
}

std::vector<FiniteLimitRow> compare_finite_to_limit(const Calibration& cal,
                                                    std::shared_ptr<const KernelOperator> kernel,
                                                    const FiniteLimitConfig& config) {
  if (config.n_list.empty()) throw ConfigError("n_list must not be empty");
  if (config.seeds < 1) throw ConfigError("seeds must be >= 1");
  const auto limit = limit_snapshots(cal, std::move(kernel), config.schedule, config.checkpoints);

  const int runs = static_cast<int>(config.n_list.size()) * config.seeds;
  const std::size_t cps = config.checkpoints.size();
  std::vector<std::vector<TrajectoryDistance>> dist(runs);
  std::vector<std::string> failures(runs);
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < runs; ++r) {
    const int n = config.n_list[r / config.seeds];
    InitDistribution d = config.dist;
    d.seed = config.dist.seed + static_cast<std::uint64_t>(r % config.seeds);
    try {
      const NetParams p = init_params(n, config.beta, d, config.activation);
      const auto finite = finite_snapshots(cal, p, config.schedule, config.checkpoints);
      for (std::size_t c = 0; c < cps; ++c) dist[r].push_back(trajectory_distance(finite[c], limit[c]));
    } catch (const std::exception& e) {
      failures[r] = e.what();
    }
  }
  for (int r = 0; r < runs; ++r) {
    if (!failures[r].empty()) throw NumericalError("finite-width run failed: " + failures[r]);
  }

  std::vector<FiniteLimitRow> rows;
  for (std::size_t ni = 0; ni < config.n_list.size(); ++ni) {
    for (std::size_t c = 0; c < cps; ++c) {
      FiniteLimitRow row;
      row.n = config.n_list[ni];
      row.step = limit[c].step;
      row.tau = limit[c].tau;
      double mean[TrajectoryDistance::kCount] = {}, se[TrajectoryDistance::kCount] = {};
      for (int k = 0; k < TrajectoryDistance::kCount; ++k) {
        double s = 0.0, s2 = 0.0;
        for (int sd = 0; sd < config.seeds; ++sd) {
          const double v = dist[ni * config.seeds + sd][c][k];
          s += v;
          s2 += v * v;
        }
        const double m = s / config.seeds;
        mean[k] = m;
        if (config.seeds > 1) {
          const double var = std::max(0.0, (s2 - config.seeds * m * m) / (config.seeds - 1));
          se[k] = std::sqrt(var / config.seeds);
        }
      }
      row.mean = {mean[0], mean[1], mean[2], mean[3], mean[4]};
      row.stderr_ = {se[0], se[1], se[2], se[3], se[4]};
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<double> init_output_norms(const SpaceTimeGrid& grid, const InitDistribution& dist,
                                      const std::vector<int>& n_list, double beta,
                                      Activation activation, int seeds) {
  if (seeds < 1) throw ConfigError("seeds must be >= 1");
  std::vector<double> out;
  for (int n : n_list) {
    double s = 0.0;
    for (int k = 0; k < seeds; ++k) {
      InitDistribution d = dist;
      d.seed = dist.seed + static_cast<std::uint64_t>(k);
      s += norm(eval_net(init_params(n, beta, d, activation), grid), NormKind::L2_DT);
    }
    out.push_back(s / seeds);
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("slope fit needs >= 2 matching points");
  const std::size_t m = x.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    if (!(x[k] > 0.0 && y[k] > 0.0)) throw DataError("slope fit needs positive values");
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = m * sxx - sx * sx;
  if (den == 0.0) throw DataError("slope fit needs distinct x values");
  return (m * sxy - sx * sy) / den;
}

KernelStepCheck finite_kernel_step(const Calibration& cal, const NetParams& params, double eta,
                                   const KernelOptions& options) {
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  const GradientResult res = gradient(cal, params);
  NetParams moved = params;
  moved.assign_flat(params.to_flat() - scaled_rate(eta, params.n, params.beta) * res.grad);
  const Field dg = eval_net(moved, cal.grid()) - res.g;
  const KernelOperator k = assemble_kernel(params, cal.grid(), options);
  const Field pred = -eta * apply_operator(k, res.u_hat);
  return {norm(dg - pred, NormKind::L2_DT), norm(pred, NormKind::L2_DT)};
}

}  // namespace nnpde
