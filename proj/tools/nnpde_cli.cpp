// nnpde: training, sweeps, limit flow and diagnostics for the neural source-term calibration.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "nnpde/errors.hpp"
#include "nnpde/experiments.hpp"

namespace {

using namespace nnpde;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> n;
  std::optional<int> epochs;
  std::optional<std::string> grid;
  std::optional<std::string> scenario;
  std::optional<bool> log_y;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON experiment config");
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--n", o.n, "neuron count");
  sub->add_option("--epochs", o.epochs, "training epochs");
  sub->add_option("--grid", o.grid, "grid sizes as nt,nx,ny");
  sub->add_option("--scenario", o.scenario, "heat, allen_cahn or custom");
  sub->add_option("--log-y", o.log_y, "log-scale y axis in plots (true or false)");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.n) {
    if (*o.n < 1) throw ConfigError("--n must be >= 1");
    c.n = *o.n;
  }
  if (o.epochs) {
    if (*o.epochs < 0) throw ConfigError("--epochs must be >= 0");
    c.epochs = *o.epochs;
  }
  if (o.scenario) c.scenario = scenario_from_string(*o.scenario);
  if (o.log_y) c.log_y = *o.log_y;
  if (o.grid) {
    int nt = 0, nx = 0, ny = 0;
    char a = 0, b = 0;
    std::istringstream in(*o.grid);
    if (!(in >> nt >> a >> nx >> b >> ny) || a != ',' || b != ',' || !in.eof()) {
      throw ConfigError("--grid expects nt,nx,ny, got '" + *o.grid + "'");
    }
    c.grid.nt = nt;
    c.grid.nx = nx;
    c.grid.ny = ny;
  }
  return c;
}

int cmd_train(const ExperimentConfig& c) {
  if (c.limit_mode) {
    const LimitSummary s = run_limit_experiment(c);
    std::printf("limit flow: %zu steps, final J %.6e, final Q %.6e, decay discrepancy %.3e\n",
                s.history.size(), s.history.back().j, s.history.back().q,
                s.decay.max_rel_discrepancy);
    return 0;
  }
  TrainOptions opts;
  const int every = std::max(1, c.epochs / 20);
  opts.on_record = [&](const TrainRecord& r) {
    if (r.epoch % every == 0 || r.epoch == c.epochs) {
      std::printf("epoch %6d  J %.6e  rmse %.6f  best %.6f  rate %.4e%s\n", r.epoch, r.j, r.rmse_rel,
                  r.best_rmse, r.rate, r.clipped ? "  clipped" : "");
    }
  };
  const TrainResult res = run_training(c, opts);
  std::printf("best relative RMSE %.6f; outputs in %s\n", res.best_rmse, c.output_dir.c_str());
  return 0;
}

int cmd_sweep(const ExperimentConfig& c) {
  const auto rows = run_n_sweep(c, c.sweep_n);
  std::printf("%8s %16s %14s %5s %7s\n", "N", "mean best RMSE", "std. error", "runs", "failed");
  for (const auto& r : rows) {
    std::printf("%8d %16.6f %14.6f %5d %7zu\n", r.n, r.mean_best_rmse, r.stderr_best_rmse, r.runs,
                r.failures.size());
  }
  return 0;
}

int cmd_limit(ExperimentConfig c) {
  const LimitSummary s = run_limit_experiment(c);
  std::printf("steps %zu  J0 %.6e  J_final %.6e  Q0 %.6e  Q_final %.6e\n", s.history.size(),
              s.history.front().j, s.history.back().j, s.history.front().q, s.history.back().q);
  std::printf("kernel: weighted Frobenius norm %.4e, Monte Carlo error estimate %.4e\n",
              s.kernel_frobenius, s.kernel_mc_error);
  std::printf("decay identity: max relative discrepancy %.4e\n", s.decay.max_rel_discrepancy);
  if (s.regularity) {
    std::printf("regularity: L_Q %.4e, max |dQ| / (L_Q int alpha) %.4e over %zu pairs (%s), "
                "dQ/dtau relative error %.4e\n",
                s.regularity->l_q, s.regularity->max_ratio, s.regularity->pairs,
                s.regularity->holds ? "holds" : "violated", s.regularity->max_dq_rel_error);
  }
  for (const auto& r : s.comparison) {
    std::printf("N %6d  step %5d  ||u-u*|| %.4e  ||uhat-uhat*|| %.4e  ||g-g*|| %.4e\n", r.n, r.step,
                r.mean.u_l2h1, r.mean.uhat_l2h1, r.mean.g_l2);
  }
  return 0;
}

int cmd_gradcheck(const ExperimentConfig& c, double tol) {
  ScenarioSetup s = build_scenario(c);
  const Calibration cal(std::move(s.problem), s.grid, std::move(s.target));
  const NetParams p = init_params(c.n, c.beta, init_distribution(c, c.seed), c.activation);
  const auto entries = gradient_check(cal, p, c.gradcheck_step);
  std::filesystem::create_directories(c.output_dir);
  std::ofstream out(c.output_dir / "gradcheck.csv");
  out.precision(17);
  out << "param,adjoint,fd,fd_half,rel_error\n";
  double worst = 0.0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    out << k << ',' << e.adjoint << ',' << e.fd << ',' << e.fd_half << ',' << e.rel_error << '\n';
    worst = std::max(worst, e.rel_error);
  }
  std::printf("%zu parameters, max relative error %.3e (tolerance %.1e): %s\n", entries.size(), worst,
              tol, worst < tol ? "PASS" : "FAIL");
  return worst < tol ? 0 : 1;
}

int cmd_spectrum(const ExperimentConfig& c) {
  const SpaceTimeGrid grid = c.grid.build();
  const KernelOperator k =
      assemble_kernel(init_distribution(c, c.seed), c.spectrum_samples, c.activation, grid);
  const auto ev = kernel_spectrum(k, -1);
  const double fro = weighted_frobenius_norm(k);
  const double lmax = ev.front(), lmin = ev.back();
  std::filesystem::create_directories(c.output_dir);
  std::ofstream out(c.output_dir / "spectrum.csv");
  out.precision(17);
  out << "k,eigenvalue\n";
  for (std::size_t i = 0; i < ev.size(); ++i) out << i << ',' << ev[i] << '\n';
  std::printf("nodes %zu, samples %d, seed %llu\n", grid.size(), c.spectrum_samples,
              static_cast<unsigned long long>(c.seed));
  for (int i = 0; i < std::min<int>(c.spectrum_k_max, static_cast<int>(ev.size())); ++i) {
    std::printf("  lambda_%d = %.6e\n", i, ev[i]);
  }
  const bool psd = lmin >= -1e-10 * lmax;
  const bool bounded = lmax <= fro;
  std::printf("lambda_min %.3e (%s), lambda_max %.6e <= Frobenius %.6e (%s)\n", lmin,
              psd ? "PSD" : "NOT PSD", lmax, fro, bounded ? "ok" : "violated");
  return psd && bounded ? 0 : 1;
}

int cmd_validate(const ExperimentConfig& c) {
  const PdeProblem p = build_problem(c);
  const ValidationReport rep = validate_assumptions(p, c.grid.build(), c.activation, c.beta,
                                                    init_distribution(c, c.seed));
  for (const auto& ch : rep.checks) {
    std::printf("%-8s %-4s %s\n", ch.id.c_str(), to_string(ch.status).c_str(), ch.detail.c_str());
  }
  std::filesystem::create_directories(c.output_dir);
  std::ofstream(c.output_dir / "validation.json") << rep.to_json().dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural source-term calibration for parabolic PDEs"};
  app.require_subcommand(1);
  Overrides o;
  double tol = 1e-6;
  auto* train = app.add_subcommand("train", "train one network");
  auto* sweep = app.add_subcommand("sweep", "train over a list of widths and seeds");
  auto* limit = app.add_subcommand("limit", "simulate the infinite-width flow");
  auto* grad = app.add_subcommand("gradcheck", "adjoint gradient against finite differences");
  auto* spec = app.add_subcommand("kernel-spectrum", "Monte Carlo kernel eigenvalues");
  auto* val = app.add_subcommand("validate", "report on the modelling assumptions");
  for (auto* s : {train, sweep, limit, grad, spec, val}) add_common(s, o);
  grad->add_option("--tol", tol, "pass threshold on the relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig c = resolve(o);
    if (train->parsed()) return cmd_train(c);
    if (sweep->parsed()) return cmd_sweep(c);
    if (limit->parsed()) return cmd_limit(c);
    if (grad->parsed()) return cmd_gradcheck(c, tol);
    if (spec->parsed()) return cmd_spectrum(c);
    if (val->parsed()) return cmd_validate(c);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const StructuralError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const ResourceError& e) {
    std::fprintf(stderr, "resource error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
