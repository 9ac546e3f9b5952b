#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nnpde/errors.hpp"
#include "nnpde/experiments.hpp"

using namespace nnpde;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nnpde_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.grid.nt = 9;
  c.grid.nx = 7;
  c.grid.ny = 7;
  c.n = 8;
  c.epochs = 15;
  c.seed = 3;
  c.schedule.base_rate = 1e-3;
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NNPDE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing round trips and rejects unknown keys") {
  ExperimentConfig c = small_config("x");
  c.scenario = Scenario::AllenCahn;
  c.optimizer.kind = OptimizerKind::GD;
  c.limit.compare_n = {10, 100};
  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(back.scenario == Scenario::AllenCahn);
  CHECK(back.grid.nx == 7);
  CHECK(back.optimizer.kind == OptimizerKind::GD);
  CHECK(back.limit.compare_n == std::vector<int>{10, 100});
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"widht": 3})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"grid": {"nz": 3}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"scenario": "wave"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"n": "ten"})")), ConfigError);
}

TEST_CASE("validation of the reference problems") {
  const auto g = SpaceTimeGrid::reference(5, 5, 5);
  const auto heat = validate_assumptions(reference_problem(Scenario::Heat), g, Activation::Tanh, 2.0 / 3.0,
                                         {-1.0, 1.0, 0});
  CHECK_FALSE(heat.any_fail());
  CHECK(heat.find("A3").measured == doctest::Approx(0.01));
  CHECK(heat.find("A1").status == CheckStatus::Warn);
  const auto ac = validate_assumptions(reference_problem(Scenario::AllenCahn), g, Activation::Tanh, 2.0 / 3.0,
                                       {-1.0, 1.0, 0});
  CHECK_FALSE(ac.any_fail());
  CHECK(ac.find("A5").measured == doctest::Approx(11.0));
  CHECK(ac.find("A5").status == CheckStatus::Warn);
  const auto shifted = validate_assumptions(reference_problem(Scenario::Heat), g, Activation::Tanh, 2.0 / 3.0,
                                            {0.0, 1.0, 0});
  CHECK(shifted.find("B3(ii)").status == CheckStatus::Fail);
  CHECK(shifted.any_fail());
  const auto beta = validate_assumptions(reference_problem(Scenario::Heat), g, Activation::Tanh, 0.5, {-1.0, 1.0, 0});
  CHECK(beta.find("beta").status == CheckStatus::Fail);
  CHECK_THROWS(heat.find("nope"));
}

TEST_CASE("custom scenario from expressions") {
  ExperimentConfig c = small_config("x");
  c.scenario = Scenario::Custom;
  c.custom.q = "u^3 - u";
  c.custom.initial = "0.2*sin(4*pi*x)*sin(2*pi*y)";
  c.custom.target_source = "1600*x*(1-2*x)*y^2*(0.2+0.6*t-y)^2*(1-y)^2";
  const ScenarioSetup custom = build_scenario(c);
  c.scenario = Scenario::AllenCahn;
  const ScenarioSetup ref = build_scenario(c);
  for (std::size_t k = 0; k < ref.target.size(); ++k) {
    CHECK(custom.target[k] == doctest::Approx(ref.target[k]).epsilon(1e-12).scale(1.0));
  }
  c.scenario = Scenario::Custom;
  c.custom.a_xx = "0.01 + sin(";
  CHECK_THROWS_AS(build_scenario(c), ConfigError);
}

TEST_CASE("training with zero epochs logs the initial state only") {
  const fs::path out = scratch("zero");
  ExperimentConfig c = small_config(out);
  c.epochs = 0;
  const TrainResult r = run_training(c);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].epoch == 0);
  CHECK(r.records[0].best_rmse == r.records[0].rmse_rel);
  CHECK(fs::exists(out / "log.csv"));
  CHECK(fs::exists(out / "best_params.json"));
  CHECK(fs::exists(out / "rmse.svg"));
  fs::remove_all(out);
}

TEST_CASE("best RMSE is the running minimum of the logged RMSE") {
  const fs::path out = scratch("best");
  const TrainResult r = run_training(small_config(out));
  std::ifstream in(out / "log.csv");
  const auto log = read_train_log(in);
  REQUIRE(log.size() == 16);
  double running = log[0].rmse_rel;
  for (const auto& rec : log) {
    running = std::min(running, rec.rmse_rel);
    CHECK(rec.best_rmse == running);
  }
  CHECK(r.best_rmse == running);
  CHECK(log.back().rmse_rel < log.front().rmse_rel);
  fs::remove_all(out);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_training(small_config(a));
  run_training(small_config(b));
  CHECK(slurp(a / "log.csv") == slurp(b / "log.csv"));
  CHECK(slurp(a / "best_params.json") == slurp(b / "best_params.json"));
  ExperimentConfig other = small_config(b);
  other.seed = 4;
  run_training(other);
  CHECK(slurp(a / "log.csv") != slurp(b / "log.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("sweep rows and degenerate widths") {
  const fs::path out = scratch("sweep");
  ExperimentConfig c = small_config(out);
  c.epochs = 5;
  c.seeds_for_averaging = 2;
  const auto rows = run_n_sweep(c, {1, 4, 4});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].n == 1);
  CHECK(rows[0].runs == 2);
  CHECK(rows[0].failures.empty());
  CHECK(rows[1].mean_best_rmse == rows[2].mean_best_rmse);
  CHECK(rows[1].stderr_best_rmse >= 0.0);
  const CsvTable t = read_csv(out / "sweep.csv");
  CHECK(t.column("n") == std::vector<double>{1, 4, 4});
  CHECK(fs::exists(out / "sweep.svg"));
  fs::remove_all(out);
}

TEST_CASE("limit experiment writes its summary") {
  const fs::path out = scratch("limit");
  ExperimentConfig c = small_config(out);
  c.limit_mode = true;
  c.limit.steps = 10;
  c.limit.kernel_samples = 200;
  c.limit.second_level = true;
  const LimitSummary s = run_limit_experiment(c);
  CHECK(s.history.size() == 10);
  CHECK(s.regularity.has_value());
  CHECK(s.regularity->holds);
  CHECK(s.decay.max_rel_discrepancy < 0.05);
  CHECK(fs::exists(out / "limit_history.csv"));
  CHECK(fs::exists(out / "limit_summary.json"));
  fs::remove_all(out);
}

TEST_CASE("command line exit codes") {
  const fs::path out = scratch("cli");
  const std::string common = " --grid 5,5,5 --out " + out.string();
  CHECK(run_cli("validate" + common) == 0);
  CHECK(fs::exists(out / "validation.json"));
  CHECK(run_cli("gradcheck --n 3" + common) == 0);
  CHECK(run_cli("train --n 4 --epochs 3" + common) == 0);
  CHECK(run_cli("train --grid 2,5,5 --out " + out.string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
  std::ofstream(out / "bad.json") << R"({"nonsense": 1})";
  CHECK(run_cli("train --config " + (out / "bad.json").string()) == 2);
  fs::remove_all(out);
}
