#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnpde/adjoint_grad.hpp"
#include "nnpde/io.hpp"
#include "nnpde/limit_dynamics.hpp"
#include "nnpde/optimizers.hpp"
#include "nnpde/pde.hpp"
#include "nnpde/shallow_net.hpp"

namespace nnpde {

enum class Scenario { Heat, AllenCahn, Custom };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct GridConfig {
  int nt = 33, nx = 17, ny = 17;
  double t_max = 1.0, x_min = 0.0, x_max = 0.5, y_min = 0.0, y_max = 1.0;
  SpaceTimeGrid build() const;
};

// Coefficient expressions for the custom scenario. The target is the forward solution
// driven by target_source, or read from target_csv when that is set.
struct CustomConfig {
  std::string a_xx = "0.01", a_xy = "0", a_yy = "0.01";
  std::string b_x = "0", b_y = "0";
  std::string c = "0";
  std::string q = "0";
  std::string initial = "0";
  std::string target_source = "0";
  std::string target_csv;
};

struct LimitConfig {
  double dtau = 1e-3;
  int steps = 200;
  int kernel_samples = 10000;
  bool second_level = false;
  ScheduleKind schedule = ScheduleKind::RobbinsMonro;
  double base_rate = 100.0;
  std::vector<int> compare_n;    // empty: no finite-width comparison
  std::vector<int> checkpoints;  // steps at which trajectories are compared
};

struct ExperimentConfig {
  Scenario scenario = Scenario::Heat;
  GridConfig grid;
  int n = 50;
  double beta = 2.0 / 3.0;
  Activation activation = Activation::Tanh;
  int epochs = 2000;
  std::uint64_t seed = 0;
  int seeds_for_averaging = 5;
  double init_c_lo = -1.0, init_c_hi = 1.0;
  OptimizerConfig optimizer;
  ScheduleConfig schedule;
  ZClipConfig zclip;
  std::filesystem::path output_dir = "out";
  bool limit_mode = false;
  LimitConfig limit;
  std::vector<int> sweep_n{10, 50, 200, 1000};
  CustomConfig custom;
  bool log_y = true;
  double gradcheck_step = 1e-5;
  int spectrum_samples = 10000;
  int spectrum_k_max = 20;
};

// Unknown keys and wrong types raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

double reference_initial(double x, double y);
double reference_target_source(double t, double x, double y);

// a = 0.01 I, no drift or reaction, reference initial data; q by scenario.
PdeProblem reference_problem(Scenario scenario);
PdeProblem build_problem(const ExperimentConfig& config);

struct ScenarioSetup {
  SpaceTimeGrid grid;
  PdeProblem problem;
  Field target;
};

ScenarioSetup build_scenario(const ExperimentConfig& config);

InitDistribution init_distribution(const ExperimentConfig& config, std::uint64_t seed);

enum class CheckStatus { Pass, Warn, Fail };
std::string to_string(CheckStatus s);

struct AssumptionCheck {
  std::string id;
  CheckStatus status = CheckStatus::Pass;
  double measured = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  bool any_fail() const;
  const AssumptionCheck& find(const std::string& id) const;
  nlohmann::json to_json() const;
};

struct ValidationOptions {
  double u_probe = 2.0;  // q is probed on |u| <= u_probe
};

// Never throws for a failing assumption; the well-posedness group only warns.
ValidationReport validate_assumptions(const PdeProblem& problem, const SpaceTimeGrid& grid,
                                      Activation activation, double beta,
                                      const InitDistribution& dist,
                                      const ValidationOptions& options = {});

struct TrainResult {
  std::vector<TrainRecord> records;
  NetParams best_params;
  NetParams final_params;
  double best_rmse = 0.0;
};

struct TrainOptions {
  bool write_outputs = true;
  std::function<void(const TrainRecord&)> on_record;
};

// One full-field gradient step per epoch; records epochs 0..E. Writes log.csv,
// best_params.json, rmse.svg and best_rmse.svg into config.output_dir.
TrainResult run_training(const ExperimentConfig& config, const Calibration& cal,
                         const TrainOptions& options = {});
TrainResult run_training(const ExperimentConfig& config, const TrainOptions& options = {});

struct SweepRow {
  int n = 0;
  double mean_best_rmse = 0.0;
  double stderr_best_rmse = 0.0;
  int runs = 0;
  std::vector<std::string> failures;
};

// Seeds seed, seed+1, ... for every N. Writes sweep.csv and sweep.svg.
std::vector<SweepRow> run_n_sweep(const ExperimentConfig& config, const std::vector<int>& n_list);

struct LimitSummary {
  std::vector<LimitRecord> history;
  DecayCheck decay;
  std::optional<RegularityCheck> regularity;
  double kernel_frobenius = 0.0;
  double kernel_mc_error = 0.0;  // estimated weighted Frobenius distance of B from its expectation
  std::vector<FiniteLimitRow> comparison;
};

// Monte Carlo B0, limit flow, history CSV and plots, decay and regularity checks.
LimitSummary run_limit_experiment(const ExperimentConfig& config);

}  // namespace nnpde
