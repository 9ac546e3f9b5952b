#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

#include "nnpde/adjoint_grad.hpp"
#include "nnpde/grid.hpp"
#include "nnpde/optimizers.hpp"
#include "nnpde/shallow_net.hpp"

namespace nnpde {

struct LimitRecord {
  double tau = 0.0;
  double j = 0.0;
  double q = 0.0;
  double norm_uhat_l2 = 0.0;
  double rate = 0.0;
  double norm_uhat_linf_l2 = 0.0;
  // Second-level quantities, NaN unless enabled.
  double norm_vhat_l2 = std::numeric_limits<double>::quiet_NaN();
  double norm_what_linf = std::numeric_limits<double>::quiet_NaN();
  double dq_adjoint = std::numeric_limits<double>::quiet_NaN();
  // |(phi_m, u_hat)| for the fixed test fields.
  std::vector<double> weak_pairings;
};

struct LimitOptions {
  bool second_level = false;
  int test_fields = 5;
  std::uint64_t test_seed = 7;
};

// Infinite-width flow  d/dtau g* = -alpha_tau T_B0 u_hat*,  g*(0) = 0, explicit Euler in tau.
struct LimitState {
  Field g_star;
  double tau = 0.0;
  int steps = 0;
  std::shared_ptr<const KernelOperator> kernel;
  std::vector<Field> test_fields;
  std::vector<LimitRecord> history;
};

LimitState make_limit_state(const Calibration& cal, std::shared_ptr<const KernelOperator> kernel,
                            const LimitOptions& options = {});

// Records the state at tau, then moves g* by -dtau alpha_tau T_B0 u_hat.
void limit_step(LimitState& state, const Calibration& cal, double dtau, const Schedule& schedule,
                const LimitOptions& options = {});

void run_limit(LimitState& state, const Calibration& cal, double dtau, int steps,
               const Schedule& schedule, const LimitOptions& options = {});

struct DecayCheck {
  double max_rel_discrepancy = 0.0;
  std::vector<double> fd;         // centred dJ/dtau at interior entries
  std::vector<double> predicted;  // -alpha Q at the same entries
};

// Centred differences of J against -alpha_tau Q over interior history entries.
DecayCheck check_decay_identity(const std::vector<LimitRecord>& history);

struct RegularityCheck {
  double l_q = 0.0;         // C2^B max||u_hat|| max||v_hat||
  double max_ratio = 0.0;   // max over pairs of |Q2 - Q1| / (l_q int alpha)
  bool holds = true;
  std::size_t pairs = 0;
  double max_dq_rel_error = 0.0;  // v_hat-based dQ/dtau against centred differences of Q
};

// Needs a history recorded with second_level enabled.
RegularityCheck check_regularity_bound(const std::vector<LimitRecord>& history,
                                       double kernel_frobenius, const Schedule& schedule);

void write_history_csv(std::ostream& out, const std::vector<LimitRecord>& history);

// Fields of one trajectory at one training time.
struct TrajectorySnapshot {
  int step = 0;
  double tau = 0.0;
  Field u, u_hat, g;
};

// Forward and adjoint at a given source.
TrajectorySnapshot evaluate_snapshot(const Calibration& cal, const Field& g, int step, double tau);

struct TrajectoryDistance {
  double u_l2h1 = 0.0, u_linfl2 = 0.0;
  double uhat_l2h1 = 0.0, uhat_linfl2 = 0.0;
  double g_l2 = 0.0;

  static constexpr int kCount = 5;
  double operator[](int k) const;
};

TrajectoryDistance trajectory_distance(const TrajectorySnapshot& a, const TrajectorySnapshot& b);

// Limit flow from g* = 0, sampled before the update of each checkpoint step.
std::vector<TrajectorySnapshot> limit_snapshots(const Calibration& cal,
                                                std::shared_ptr<const KernelOperator> kernel,
                                                const ScheduleConfig& schedule,
                                                const std::vector<int>& checkpoints);

// Plain gradient descent with parameter rate dtau alpha_tau N^(2 beta - 1), same sampling.
std::vector<TrajectorySnapshot> finite_snapshots(const Calibration& cal, NetParams params,
                                                 const ScheduleConfig& schedule,
                                                 const std::vector<int>& checkpoints);

struct FiniteLimitConfig {
  InitDistribution dist;
  std::vector<int> n_list;
  double beta = 2.0 / 3.0;
  Activation activation = Activation::Tanh;
  ScheduleConfig schedule;
  std::vector<int> checkpoints;
  int seeds = 5;
};

struct FiniteLimitRow {
  int n = 0;
  int step = 0;
  double tau = 0.0;
  TrajectoryDistance mean;
  TrajectoryDistance stderr_;
};

// Seed k uses dist.seed + k for every N. Rows are ordered by N, then checkpoint.
std::vector<FiniteLimitRow> compare_finite_to_limit(const Calibration& cal,
                                                    std::shared_ptr<const KernelOperator> kernel,
                                                    const FiniteLimitConfig& config);

// Seed-averaged ||g^N_theta0||_{L2(D_T)} per N.
std::vector<double> init_output_norms(const SpaceTimeGrid& grid, const InitDistribution& dist,
                                      const std::vector<int>& n_list, double beta,
                                      Activation activation, int seeds);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct KernelStepCheck {
  double error = 0.0;      // ||dg - predicted||_{L2}
  double predicted = 0.0;  // ||eta T_B(mu^N) u_hat||_{L2}
  double relative() const { return predicted > 0.0 ? error / predicted : 0.0; }
};

// One plain GD step with parameter rate eta N^(2 beta - 1), compared with -eta T_B u_hat
// for the empirical kernel of the current units.
KernelStepCheck finite_kernel_step(const Calibration& cal, const NetParams& params, double eta,
                                   const KernelOptions& options = {});

}  // namespace nnpde
