// Acceptance suite: one PASS/FAIL line per primary criterion.
//
//   acceptance [id ...]     run a subset, e.g. `acceptance 1 4 11`

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nnpde/experiments.hpp"
#include "nnpde/limit_dynamics.hpp"
#include "test_support.hpp"

using namespace nnpde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string sci(double v) { return fmt("%.3e", v); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nnpde_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Grid for the dense limit-flow checks; the training grid is too large for a dense kernel.
const GridConfig kLimitGrid{17, 9, 9};

Calibration reference_calibration(Scenario sc, const SpaceTimeGrid& g) {
  const PdeProblem p = reference_problem(sc);
  return Calibration(p, g, solve_forward(p, sample_function(g, reference_target_source), g).u);
}

std::shared_ptr<const KernelOperator> limit_kernel(const SpaceTimeGrid& g, int samples = 10000) {
  return std::make_shared<const KernelOperator>(
      assemble_kernel(InitDistribution{-1.0, 1.0, 0}, samples, Activation::Tanh, g));
}

Schedule limit_schedule(double dtau) {
  ScheduleConfig s;
  s.kind = ScheduleKind::RobbinsMonro;
  s.base_rate = 100.0;
  s.dtau = dtau;
  return Schedule(s);
}

Outcome gradient_correctness() {
  const auto g = SpaceTimeGrid::reference(7, 7, 7);
  double worst = 0.0;
  std::size_t count = 0;
  for (Scenario sc : {Scenario::Heat, Scenario::AllenCahn}) {
    const Calibration cal = reference_calibration(sc, g);
    for (const auto& e : gradient_check(cal, init_params(3, 2.0 / 3.0, {-1.0, 1.0, 1}))) {
      worst = std::max(worst, e.rel_error);
      ++count;
    }
  }
  return {worst < 1e-6, "max relative error " + sci(worst) + " over " + std::to_string(count) +
                            " parameters (tol 1e-6)"};
}

Outcome adjoint_transpose() {
  const auto g = SpaceTimeGrid::reference(9, 9, 9);
  double worst = 0.0;
  for (Scenario sc : {Scenario::Heat, Scenario::AllenCahn}) {
    const ParabolicSolver s(reference_problem(sc), g);
    const ForwardSolution fwd = s.forward(testing::random_field(g, 1, 2.0));
    for (unsigned k = 0; k < 20; ++k) {
      const Field src = testing::random_field(g, 100 + k), r = testing::random_field(g, 500 + k);
      const double lhs = inner_product_l2(s.tangent(fwd, src), r);
      const double rhs = inner_product_l2(src, s.adjoint(fwd, r));
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
    }
  }
  return {worst < 1e-10, "max relative mismatch " + sci(worst) + " over 20 pairs per scenario (tol 1e-10)"};
}

// Observed orders approach the nominal one from below, so they are compared after rounding to
// two decimals.
Outcome mms_orders() {
  std::vector<double> et, ex;
  for (int nt : {17, 33, 65, 129}) et.push_back(testing::mms_time_error(nt));
  for (int m : {33, 65, 129, 257}) ex.push_back(testing::mms_space_error(m));
  double ot = 1e9, ox = 1e9;
  for (std::size_t k = 0; k + 1 < et.size(); ++k) {
    ot = std::min(ot, std::log2(et[k] / et[k + 1]));
    ox = std::min(ox, std::log2(ex[k] / ex[k + 1]));
  }
  const double rt = std::round(ot * 100) / 100, rx = std::round(ox * 100) / 100;
  return {rt >= 1.0 && rx >= 2.0, "min order in dt " + fmt("%.4f", ot) + " (need >= 1 at 2 decimals), in h " +
                                      fmt("%.4f", ox) + " (need >= 2 at 2 decimals)"};
}

Outcome kernel_psd() {
  const auto g = SpaceTimeGrid::reference(6, 6, 6);
  const KernelOperator k = assemble_kernel(InitDistribution{-1.0, 1.0, 0}, 10000, Activation::Tanh, g);
  const auto ev = kernel_spectrum(k, -1);
  const double lmax = ev.front(), lmin = ev.back(), fro = weighted_frobenius_norm(k);
  return {lmin >= -1e-10 * lmax && lmax <= fro,
          "lambda_min/lambda_max " + sci(lmin / lmax) + " (>= -1e-10), lambda_max " + sci(lmax) +
              " <= Frobenius " + sci(fro)};
}

double decay_discrepancy(double dtau, int steps, std::vector<LimitRecord>* history = nullptr) {
  const SpaceTimeGrid g = kLimitGrid.build();
  const Calibration cal = reference_calibration(Scenario::Heat, g);
  LimitState st = make_limit_state(cal, limit_kernel(g));
  run_limit(st, cal, dtau, steps, limit_schedule(dtau));
  if (history) *history = st.history;
  return check_decay_identity(st.history).max_rel_discrepancy;
}

Outcome decay_identity() {
  const double d1 = decay_discrepancy(1e-3, 200), d2 = decay_discrepancy(5e-4, 400);
  const double ratio = d2 / d1;
  return {d1 < 5e-2 && ratio > 0.3 && ratio < 0.7,
          "discrepancy " + sci(d1) + " at dtau 1e-3 (tol 5e-2), " + sci(d2) + " at 5e-4, ratio " +
              fmt("%.3f", ratio) + " (halving: 0.3..0.7)"};
}

Outcome monotone_decay() {
  std::vector<LimitRecord> h;
  decay_discrepancy(1e-3, 501, &h);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * h.front().j;
  double worst_rise = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < h.size(); ++k) worst_rise = std::max(worst_rise, h[k].j - h[k - 1].j);
  const double ratio = h.back().q / h.front().q;
  return {worst_rise <= tol && ratio < 0.05,
          "max step increase of J " + sci(worst_rise) + " (tol " + sci(tol) + "), Q(500)/Q(0) " + sci(ratio) +
              " (< 0.05)"};
}

Outcome regularity() {
  const SpaceTimeGrid g = kLimitGrid.build();
  const Calibration cal = reference_calibration(Scenario::Heat, g);
  const auto kernel = limit_kernel(g);
  LimitOptions opt;
  opt.second_level = true;
  LimitState st = make_limit_state(cal, kernel, opt);
  const Schedule s = limit_schedule(1e-3);
  run_limit(st, cal, 1e-3, 100, s, opt);
  const RegularityCheck r = check_regularity_bound(st.history, weighted_frobenius_norm(*kernel), s);
  return {r.holds && r.max_dq_rel_error < 5e-2,
          "max |dQ|/(L_Q int alpha) " + fmt("%.4f", r.max_ratio) + " over " + std::to_string(r.pairs) +
              " pairs (<= 1), dQ/dtau relative error " + sci(r.max_dq_rel_error) + " (tol 5e-2)"};
}

Outcome kernel_step() {
  const SpaceTimeGrid g = kLimitGrid.build();
  const Calibration cal = reference_calibration(Scenario::Heat, g);
  const NetParams p = init_params(100, 2.0 / 3.0, {-1.0, 1.0, 2});
  std::vector<double> rel;
  for (double eta : {4e-2, 2e-2, 1e-2, 5e-3}) rel.push_back(finite_kernel_step(cal, p, eta).relative());
  bool ok = true;
  std::string ratios;
  for (std::size_t k = 0; k + 1 < rel.size(); ++k) {
    const double r = rel[k + 1] / rel[k];
    ok = ok && r > 0.4 && r < 0.6;
    ratios += (k ? ", " : "") + fmt("%.3f", r);
  }
  return {ok, "relative error " + sci(rel.front()) + " at eta 4e-2, ratios per halving " + ratios +
                  " (0.4..0.6)"};
}

Outcome n_sweep() {
  const std::vector<int> n_list{10, 50, 200, 1000};
  bool ok = true;
  std::string detail;
  for (Scenario sc : {Scenario::Heat, Scenario::AllenCahn}) {
    ExperimentConfig c;
    c.scenario = sc;
    c.epochs = 2000;
    c.seeds_for_averaging = 5;
    c.output_dir = scratch("sweep_" + to_string(sc));
    const auto rows = run_n_sweep(c, n_list);
    detail += (detail.empty() ? "" : "; ") + to_string(sc) + ":";
    for (std::size_t k = 0; k < rows.size(); ++k) {
      detail += " " + fmt("%.4f", rows[k].mean_best_rmse);
      ok = ok && rows[k].failures.empty();
      if (k > 0) ok = ok && rows[k].mean_best_rmse < rows[k - 1].mean_best_rmse;
      if (rows[k].n >= 200) ok = ok && rows[k].mean_best_rmse < 0.2;
    }
  }
  return {ok, "seed-mean best RMSE for N = 10, 50, 200, 1000: " + detail +
                  " (strictly decreasing, < 0.2 for N >= 200)"};
}

Outcome limit_agreement() {
  const double beta = 2.0 / 3.0;
  const std::vector<int> widths{100, 1000, 10000};
  const auto norms = init_output_norms(GridConfig{}.build(), {-1.0, 1.0, 0}, widths, beta, Activation::Tanh, 5);
  const double slope = loglog_slope({1e2, 1e3, 1e4}, norms);
  const double target = -(beta - 0.5);

  const SpaceTimeGrid g = kLimitGrid.build();
  const Calibration cal = reference_calibration(Scenario::Heat, g);
  FiniteLimitConfig fc;
  fc.dist = {-1.0, 1.0, 1000};
  fc.n_list = {10, 100, 1000};
  fc.schedule.kind = ScheduleKind::RobbinsMonro;
  fc.schedule.base_rate = 100.0;
  fc.schedule.dtau = 1e-3;
  fc.checkpoints = {0, 500};
  fc.seeds = 5;
  const auto rows = compare_finite_to_limit(cal, limit_kernel(g), fc);
  std::vector<const FiniteLimitRow*> last;
  for (const auto& r : rows) {
    if (r.step == 500) last.push_back(&r);
  }
  bool decreasing = last.size() == 3;
  for (std::size_t k = 1; k < last.size(); ++k) {
    for (int d = 0; d < TrajectoryDistance::kCount; ++d) {
      decreasing = decreasing && last[k]->mean[d] < last[k - 1]->mean[d];
    }
  }
  std::string dist;
  for (const auto* r : last) dist += " " + sci(r->mean.g_l2);
  return {std::abs(slope - target) <= 0.15 && decreasing,
          "init slope " + fmt("%.4f", slope) + " (target " + fmt("%.4f", target) +
              " +- 0.15); final ||g - g*|| for N = 10, 100, 1000:" + dist +
              (decreasing ? " (all five distances decreasing)" : " (not decreasing)")};
}

Outcome determinism() {
  ExperimentConfig c;
  c.n = 50;
  c.epochs = 200;
  c.seed = 11;
  ExperimentConfig lc = c;
  lc.limit_mode = true;
  lc.grid = kLimitGrid;
  lc.limit.steps = 100;
  lc.limit.kernel_samples = 1024;
  lc.limit.compare_n = {20};
  lc.limit.checkpoints = {0, 100};

  std::vector<std::string> files[2];
  for (int run = 0; run < 2; ++run) {
    omp_set_num_threads(run + 1);
    c.output_dir = scratch("det_train" + std::to_string(run));
    lc.output_dir = scratch("det_limit" + std::to_string(run));
    ExperimentConfig sc = c;
    sc.epochs = 50;
    sc.seeds_for_averaging = 2;
    sc.output_dir = scratch("det_sweep" + std::to_string(run));
    run_training(c);
    run_limit_experiment(lc);
    run_n_sweep(sc, {5, 20});
    files[run] = {slurp(c.output_dir / "log.csv"), slurp(lc.output_dir / "limit_history.csv"),
                  slurp(lc.output_dir / "limit_compare.csv"), slurp(sc.output_dir / "sweep.csv")};
  }
  omp_set_num_threads(omp_get_num_procs());
  bool same = true;
  for (std::size_t k = 0; k < files[0].size(); ++k) same = same && !files[0][k].empty() && files[0][k] == files[1][k];
  return {same, "train, limit, comparison and sweep CSVs bitwise identical across two runs (1 and 2 threads)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient correctness", 30, gradient_correctness},
      {2, "adjoint transpose identity", 10, adjoint_transpose},
      {3, "manufactured-solution convergence", 60, mms_orders},
      {4, "kernel PSD and spectrum", 60, kernel_psd},
      {5, "loss-decay identity", 300, decay_identity},
      {6, "monotone J and Q decay", 600, monotone_decay},
      {7, "regularity bound", 600, regularity},
      {8, "finite-N kernel dynamics", 120, kernel_step},
      {9, "N-sweep trend", 7200, n_sweep},
      {10, "limit agreement", 3600, limit_agreement},
      {11, "determinism", 300, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s  [%2d] %s: %s; %.1f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
