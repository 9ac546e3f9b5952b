#include "nnpde/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <limits>
#include <set>
#include <sstream>

#include "nnpde/errors.hpp"
#include "nnpde/expression.hpp"

namespace nnpde {

using nlohmann::json;

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Heat: return "heat";
    case Scenario::AllenCahn: return "allen_cahn";
    case Scenario::Custom: return "custom";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "heat") return Scenario::Heat;
  if (s == "allen_cahn") return Scenario::AllenCahn;
  if (s == "custom") return Scenario::Custom;
  throw ConfigError("unknown scenario '" + s + "' (expected heat, allen_cahn or custom)");
}

SpaceTimeGrid GridConfig::build() const {
  return SpaceTimeGrid(nt, nx, ny, t_max, x_min, x_max, y_min, y_max);
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::string read_string(const json& j, const char* key, const std::string& fallback,
                        const std::string& where) {
  std::string s = fallback;
  read(j, key, s, where);
  return s;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j,
             {"scenario", "grid", "n", "beta", "activation", "epochs", "seed", "seeds_for_averaging",
              "init", "optimizer", "schedule", "zclip", "output_dir", "limit_mode", "limit", "sweep",
              "custom", "log_y", "gradcheck", "kernel_spectrum"},
             "config");
  c.scenario = scenario_from_string(read_string(j, "scenario", "heat", "config"));
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, {"nt", "nx", "ny", "t_max", "x_min", "x_max", "y_min", "y_max"}, "grid");
    read(g, "nt", c.grid.nt, "grid");
    read(g, "nx", c.grid.nx, "grid");
    read(g, "ny", c.grid.ny, "grid");
    read(g, "t_max", c.grid.t_max, "grid");
    read(g, "x_min", c.grid.x_min, "grid");
    read(g, "x_max", c.grid.x_max, "grid");
    read(g, "y_min", c.grid.y_min, "grid");
    read(g, "y_max", c.grid.y_max, "grid");
  }
  read(j, "n", c.n, "config");
  read(j, "beta", c.beta, "config");
  c.activation = activation_from_string(read_string(j, "activation", "tanh", "config"));
  read(j, "epochs", c.epochs, "config");
  read(j, "seed", c.seed, "config");
  read(j, "seeds_for_averaging", c.seeds_for_averaging, "config");
  if (j.contains("init")) {
    check_keys(j["init"], {"c_lo", "c_hi"}, "init");
    read(j["init"], "c_lo", c.init_c_lo, "init");
    read(j["init"], "c_hi", c.init_c_hi, "init");
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    check_keys(o, {"kind", "beta1", "beta2", "epsilon"}, "optimizer");
    c.optimizer.kind = optimizer_kind_from_string(read_string(o, "kind", "adam", "optimizer"));
    read(o, "beta1", c.optimizer.beta1, "optimizer");
    read(o, "beta2", c.optimizer.beta2, "optimizer");
    read(o, "epsilon", c.optimizer.epsilon, "optimizer");
  }
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    check_keys(s, {"kind", "base_rate", "dtau", "factor", "patience", "threshold", "patience_decay",
                   "patience_min"},
               "schedule");
    c.schedule.kind = schedule_kind_from_string(read_string(s, "kind", "plateau", "schedule"));
    read(s, "base_rate", c.schedule.base_rate, "schedule");
    read(s, "dtau", c.schedule.dtau, "schedule");
    read(s, "factor", c.schedule.factor, "schedule");
    read(s, "patience", c.schedule.patience, "schedule");
    read(s, "threshold", c.schedule.threshold, "schedule");
    read(s, "patience_decay", c.schedule.patience_decay, "schedule");
    read(s, "patience_min", c.schedule.patience_min, "schedule");
  }
  if (j.contains("zclip")) {
    const json& z = j["zclip"];
    check_keys(z, {"enabled", "alpha", "z_threshold", "warmup"}, "zclip");
    read(z, "enabled", c.zclip.enabled, "zclip");
    read(z, "alpha", c.zclip.alpha, "zclip");
    read(z, "z_threshold", c.zclip.z_threshold, "zclip");
    read(z, "warmup", c.zclip.warmup, "zclip");
  }
  std::string out = c.output_dir.string();
  read(j, "output_dir", out, "config");
  c.output_dir = out;
  read(j, "limit_mode", c.limit_mode, "config");
  if (j.contains("limit")) {
    const json& l = j["limit"];
    check_keys(l, {"dtau", "steps", "kernel_samples", "second_level", "schedule", "base_rate",
                   "compare_n", "checkpoints"},
               "limit");
    read(l, "dtau", c.limit.dtau, "limit");
    read(l, "steps", c.limit.steps, "limit");
    read(l, "kernel_samples", c.limit.kernel_samples, "limit");
    read(l, "second_level", c.limit.second_level, "limit");
    c.limit.schedule = schedule_kind_from_string(read_string(l, "schedule", "robbins_monro", "limit"));
    read(l, "base_rate", c.limit.base_rate, "limit");
    read(l, "compare_n", c.limit.compare_n, "limit");
    read(l, "checkpoints", c.limit.checkpoints, "limit");
  }
  if (j.contains("sweep")) {
    check_keys(j["sweep"], {"n_list"}, "sweep");
    read(j["sweep"], "n_list", c.sweep_n, "sweep");
  }
  if (j.contains("custom")) {
    const json& u = j["custom"];
    check_keys(u, {"a_xx", "a_xy", "a_yy", "b_x", "b_y", "c", "q", "initial", "target_source",
                   "target_csv"},
               "custom");
    read(u, "a_xx", c.custom.a_xx, "custom");
    read(u, "a_xy", c.custom.a_xy, "custom");
    read(u, "a_yy", c.custom.a_yy, "custom");
    read(u, "b_x", c.custom.b_x, "custom");
    read(u, "b_y", c.custom.b_y, "custom");
    read(u, "c", c.custom.c, "custom");
    read(u, "q", c.custom.q, "custom");
    read(u, "initial", c.custom.initial, "custom");
    read(u, "target_source", c.custom.target_source, "custom");
    read(u, "target_csv", c.custom.target_csv, "custom");
  }
  read(j, "log_y", c.log_y, "config");
  if (j.contains("gradcheck")) {
    check_keys(j["gradcheck"], {"step"}, "gradcheck");
    read(j["gradcheck"], "step", c.gradcheck_step, "gradcheck");
  }
  if (j.contains("kernel_spectrum")) {
    check_keys(j["kernel_spectrum"], {"samples", "k_max"}, "kernel_spectrum");
    read(j["kernel_spectrum"], "samples", c.spectrum_samples, "kernel_spectrum");
    read(j["kernel_spectrum"], "k_max", c.spectrum_k_max, "kernel_spectrum");
  }
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.seeds_for_averaging < 1) throw ConfigError("seeds_for_averaging must be >= 1");
  if (c.n < 1) throw ConfigError("n must be >= 1");
  c.schedule.total_steps = std::max(c.schedule.total_steps, c.epochs);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return {
      {"scenario", to_string(c.scenario)},
      {"grid",
       {{"nt", c.grid.nt}, {"nx", c.grid.nx}, {"ny", c.grid.ny}, {"t_max", c.grid.t_max},
        {"x_min", c.grid.x_min}, {"x_max", c.grid.x_max}, {"y_min", c.grid.y_min},
        {"y_max", c.grid.y_max}}},
      {"n", c.n},
      {"beta", c.beta},
      {"activation", to_string(c.activation)},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"seeds_for_averaging", c.seeds_for_averaging},
      {"init", {{"c_lo", c.init_c_lo}, {"c_hi", c.init_c_hi}}},
      {"optimizer",
       {{"kind", to_string(c.optimizer.kind)}, {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2}, {"epsilon", c.optimizer.epsilon}}},
      {"schedule",
       {{"kind", to_string(c.schedule.kind)}, {"base_rate", c.schedule.base_rate},
        {"dtau", c.schedule.dtau}, {"factor", c.schedule.factor},
        {"patience", c.schedule.patience}, {"threshold", c.schedule.threshold},
        {"patience_decay", c.schedule.patience_decay}, {"patience_min", c.schedule.patience_min}}},
      {"zclip",
       {{"enabled", c.zclip.enabled}, {"alpha", c.zclip.alpha},
        {"z_threshold", c.zclip.z_threshold}, {"warmup", c.zclip.warmup}}},
      {"output_dir", c.output_dir.string()},
      {"limit_mode", c.limit_mode},
      {"limit",
       {{"dtau", c.limit.dtau}, {"steps", c.limit.steps},
        {"kernel_samples", c.limit.kernel_samples}, {"second_level", c.limit.second_level},
        {"schedule", to_string(c.limit.schedule)}, {"base_rate", c.limit.base_rate},
        {"compare_n", c.limit.compare_n}, {"checkpoints", c.limit.checkpoints}}},
      {"sweep", {{"n_list", c.sweep_n}}},
      {"custom",
       {{"a_xx", c.custom.a_xx}, {"a_xy", c.custom.a_xy}, {"a_yy", c.custom.a_yy},
        {"b_x", c.custom.b_x}, {"b_y", c.custom.b_y}, {"c", c.custom.c}, {"q", c.custom.q},
        {"initial", c.custom.initial}, {"target_source", c.custom.target_source},
        {"target_csv", c.custom.target_csv}}},
      {"log_y", c.log_y},
      {"gradcheck", {{"step", c.gradcheck_step}}},
      {"kernel_spectrum", {{"samples", c.spectrum_samples}, {"k_max", c.spectrum_k_max}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

double reference_initial(double x, double y) {
  return 0.2 * std::sin(4.0 * std::numbers::pi * x) * std::sin(2.0 * std::numbers::pi * y);
}

double reference_target_source(double t, double x, double y) {
  const double a = 0.2 + 0.6 * t - y;
  return 1600.0 * x * (1.0 - 2.0 * x) * y * y * a * a * (1.0 - y) * (1.0 - y);
}

PdeProblem reference_problem(Scenario scenario) {
  PdeProblem p = PdeProblem::isotropic(0.01);
  p.initial = reference_initial;
  p.q = scenario == Scenario::AllenCahn ? Nonlinearity::allen_cahn() : Nonlinearity::zero();
  return p;
}

PdeProblem build_problem(const ExperimentConfig& config) {
  if (config.scenario != Scenario::Custom) return reference_problem(config.scenario);
  const CustomConfig& cc = config.custom;
  const Expression axx = Expression::parse(cc.a_xx), axy = Expression::parse(cc.a_xy),
                   ayy = Expression::parse(cc.a_yy), bx = Expression::parse(cc.b_x),
                   by = Expression::parse(cc.b_y), c = Expression::parse(cc.c),
                   q = Expression::parse(cc.q), f = Expression::parse(cc.initial);
  for (const Expression* e : {&axx, &axy, &ayy, &bx, &by, &c}) {
    if (e->depends_on('u')) throw ConfigError("coefficient '" + e->source() + "' may not depend on u");
  }
  if (f.depends_on('u') || f.depends_on('t')) {
    throw ConfigError("initial data '" + f.source() + "' may only depend on x and y");
  }
  PdeProblem p;
  p.diffusion = [=](double t, double x, double y) {
    return SymMatrix2{axx(t, x, y), axy(t, x, y), ayy(t, x, y)};
  };
  p.drift = [=](double t, double x, double y) { return Vector2{bx(t, x, y), by(t, x, y)}; };
  p.reaction = [=](double t, double x, double y) { return c(t, x, y); };
  const Expression qu = q.derivative_u(), quu = qu.derivative_u();
  p.q.value = [=](double t, double x, double y, double u) { return q(t, x, y, u); };
  p.q.du = [=](double t, double x, double y, double u) { return qu(t, x, y, u); };
  p.q.duu = [=](double t, double x, double y, double u) { return quu(t, x, y, u); };
  p.initial = [=](double x, double y) { return f(0.0, x, y); };
  p.time_dependent = axx.depends_on('t') || axy.depends_on('t') || ayy.depends_on('t') ||
                     bx.depends_on('t') || by.depends_on('t') || c.depends_on('t');
  return p;
}

ScenarioSetup build_scenario(const ExperimentConfig& config) {
  const SpaceTimeGrid grid = config.grid.build();
  PdeProblem problem = build_problem(config);
  if (config.scenario == Scenario::Custom && !config.custom.target_csv.empty()) {
    std::ifstream in(config.custom.target_csv);
    if (!in) throw ConfigError("cannot open target_csv " + config.custom.target_csv);
    Field target = read_field_csv(in, grid);
    return {grid, std::move(problem), std::move(target)};
  }
  SpaceTimeFunction source = reference_target_source;
  if (config.scenario == Scenario::Custom) {
    const Expression e = Expression::parse(config.custom.target_source);
    if (e.depends_on('u')) throw ConfigError("target_source may not depend on u");
    source = [e](double t, double x, double y) { return e(t, x, y); };
  }
  const ParabolicSolver solver(problem, grid);
  Field target = solver.forward(sample_function(grid, source)).u;
  return {grid, std::move(problem), std::move(target)};
}

InitDistribution init_distribution(const ExperimentConfig& config, std::uint64_t seed) {
  return {config.init_c_lo, config.init_c_hi, seed};
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Warn: return "warn";
    case CheckStatus::Fail: return "fail";
  }
  return "?";
}

bool ValidationReport::any_fail() const {
  return std::any_of(checks.begin(), checks.end(),
                     [](const AssumptionCheck& c) { return c.status == CheckStatus::Fail; });
}

const AssumptionCheck& ValidationReport::find(const std::string& id) const {
  for (const auto& c : checks) {
    if (c.id == id) return c;
  }
  throw ConfigError("no assumption check named '" + id + "'");
}

json ValidationReport::to_json() const {
  json arr = json::array();
  for (const auto& c : checks) {
    arr.push_back({{"id", c.id}, {"status", to_string(c.status)}, {"measured", c.measured},
                   {"detail", c.detail}});
  }
  return arr;
}

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// max over nodes and probe values |u| <= r of |fn(t,x,y,u)| / (1 + |u|)^power.
double probe_q(const Nonlinearity::Fn& fn, const SpaceTimeGrid& g, double r, int power) {
  double m = 0.0;
  constexpr int kU = 81;
  for (int n = 0; n < g.t_count(); ++n) {
    for (int i = 0; i < g.x_count(); ++i) {
      for (int j = 0; j < g.y_count(); ++j) {
        for (int k = 0; k < kU; ++k) {
          const double u = -r + 2.0 * r * k / (kU - 1);
          const double v = std::abs(fn(g.t(n), g.x(i), g.y(j), u)) / std::pow(1.0 + std::abs(u), power);
          m = std::max(m, v);
        }
      }
    }
  }
  return m;
}

// A bound measured on |u| <= r that grows when the box doubles is reported as local only.
AssumptionCheck growth_check(const std::string& id, const std::string& what,
                             const Nonlinearity::Fn& fn, const SpaceTimeGrid& g, double r,
                             int power, CheckStatus when_unbounded) {
  const double inner = probe_q(fn, g, r, power), outer = probe_q(fn, g, 2.0 * r, power);
  AssumptionCheck c{id, CheckStatus::Pass, inner, what + " = " + num(inner) + " on |u| <= " + num(r)};
  if (!std::isfinite(inner)) {
    c.status = CheckStatus::Fail;
    c.detail += " (non-finite)";
  } else if (outer > inner * (1.0 + 1e-9) + 1e-14) {
    c.status = when_unbounded;
    c.detail += "; grows to " + num(outer) + " on |u| <= " + num(2.0 * r) +
                ", so no global bound holds for unbounded u";
  }
  return c;
}

}  // namespace

ValidationReport validate_assumptions(const PdeProblem& problem, const SpaceTimeGrid& g,
                                      Activation activation, double beta,
                                      const InitDistribution& dist, const ValidationOptions& opt) {
  ValidationReport rep;
  auto add = [&](AssumptionCheck c) { rep.checks.push_back(std::move(c)); };

  add({"A1", CheckStatus::Warn, 0.0,
       "rectangular domain; corners are not C2, the finite-difference scheme does not need it"});
  const double vol = (g.x_max() - g.x_min()) * (g.y_max() - g.y_min());
  add({"A2", CheckStatus::Pass, vol, "bounded rectangle, area " + num(vol)});

  double nu = std::numeric_limits<double>::infinity(), coef_max = 0.0, deriv_max = 0.0;
  bool finite = true;
  for (int n = 0; n < g.t_count(); ++n) {
    for (int i = 0; i < g.x_count(); ++i) {
      for (int j = 0; j < g.y_count(); ++j) {
        const double t = g.t(n), x = g.x(i), y = g.y(j);
        const SymMatrix2 a = problem.diffusion(t, x, y);
        const Vector2 b = problem.drift(t, x, y);
        const double c = problem.reaction(t, x, y);
        nu = std::min(nu, a.min_eigenvalue());
        for (double v : {a.xx, a.xy, a.yy, b.x, b.y, c}) {
          finite = finite && std::isfinite(v);
          coef_max = std::max(coef_max, std::abs(v));
        }
        if (i + 1 < g.x_count() && j + 1 < g.y_count()) {
          const SymMatrix2 ax = problem.diffusion(t, g.x(i + 1), y), ay = problem.diffusion(t, x, g.y(j + 1));
          const Vector2 bxp = problem.drift(t, g.x(i + 1), y), byp = problem.drift(t, x, g.y(j + 1));
          for (double d : {(ax.xx - a.xx) / g.hx(), (ax.xy - a.xy) / g.hx(), (ax.yy - a.yy) / g.hx(),
                           (ay.xx - a.xx) / g.hy(), (ay.xy - a.xy) / g.hy(), (ay.yy - a.yy) / g.hy(),
                           (bxp.x - b.x) / g.hx(), (bxp.y - b.y) / g.hx(), (byp.x - b.x) / g.hy(),
                           (byp.y - b.y) / g.hy()}) {
            deriv_max = std::max(deriv_max, std::abs(d));
          }
        }
      }
    }
  }
  add({"A3", nu > 0.0 ? CheckStatus::Pass : CheckStatus::Fail, nu,
       "smallest eigenvalue of a over the grid nodes: nu = " + num(nu)});
  add({"A4", finite && std::isfinite(deriv_max) ? CheckStatus::Pass : CheckStatus::Fail, coef_max,
       "max |a|,|b|,|c| = " + num(coef_max) + ", max difference quotient in space = " + num(deriv_max)});
  add(growth_check("A5", "c_q = max |q_u|", problem.q.du, g, opt.u_probe, 0, CheckStatus::Warn));
  add(growth_check("A6", "c'_q = max |q_uu|", problem.q.duu, g, opt.u_probe, 0, CheckStatus::Warn));

  add({"W1", std::isfinite(deriv_max) ? CheckStatus::Pass : CheckStatus::Warn, deriv_max,
       "coefficients have bounded difference quotients on the grid (Hoelder continuity not probed)"});
  {
    AssumptionCheck w2 = growth_check("W2", "C_q = max |q| / (1 + |u|)", problem.q.value, g,
                                      opt.u_probe, 1, CheckStatus::Warn);
    if (w2.status == CheckStatus::Fail) w2.status = CheckStatus::Warn;
    add(w2);
  }
  {
    const double fd = probe_q(
        [&](double t, double x, double y, double u) {
          const double h = 1e-6;
          const double fdq = (problem.q.value(t, x, y, u + h) - problem.q.value(t, x, y, u - h)) / (2 * h);
          return fdq - problem.q.du(t, x, y, u);
        },
        g, opt.u_probe, 0);
    const double scale = 1.0 + probe_q(problem.q.du, g, opt.u_probe, 0);
    add({"W3", fd <= 1e-5 * scale ? CheckStatus::Pass : CheckStatus::Warn, fd,
         "q_u agrees with a difference quotient of q to " + num(fd)});
  }
  {
    double fb = 0.0;
    for (int i = 0; i < g.x_count(); ++i) {
      for (int j = 0; j < g.y_count(); ++j) {
        if (g.on_spatial_boundary(i, j)) fb = std::max(fb, std::abs(problem.initial(g.x(i), g.y(j))));
      }
    }
    add({"W4", fb <= 1e-12 ? CheckStatus::Pass : CheckStatus::Warn, fb,
         "max |f| on the boundary = " + num(fb)});
  }

  {
    constexpr int kZ = 4001;
    const double zmax = 20.0, dz = 2 * zmax / (kZ - 1);
    double cs = 0.0, cds = 0.0, ls = 0.0, lds = 0.0, lo = 1e300, hi = -1e300;
    for (int k = 0; k < kZ; ++k) {
      const double z = -zmax + k * dz;
      const double s = activate(activation, z), ds = activate_derivative(activation, z);
      cs = std::max(cs, std::abs(s));
      cds = std::max(cds, std::abs(ds));
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      if (k > 0) {
        ls = std::max(ls, std::abs(s - activate(activation, z - dz)) / dz);
        lds = std::max(lds, std::abs(ds - activate_derivative(activation, z - dz)) / dz);
      }
    }
    add({"B1", hi > lo && cs <= activation_bound(activation) ? CheckStatus::Pass : CheckStatus::Fail, cs,
         to_string(activation) + ": C_sigma = " + num(cs) + ", L_sigma = " + num(ls) +
             ", range " + num(hi - lo)});
    add({"B2", cds <= activation_derivative_bound(activation) ? CheckStatus::Pass : CheckStatus::Fail, cds,
         "C_sigma' = " + num(cds) + ", L_sigma' = " + num(lds)});
  }
  add({"B3(i)", CheckStatus::Pass, 0.0, "c is drawn independently of (w_t, w, eta)"});
  {
    const double mean = 0.5 * (dist.c_lo + dist.c_hi);
    const bool ok = std::abs(mean) <= 1e-12 * std::max(1.0, dist.c_hi - dist.c_lo) &&
                    std::isfinite(dist.c_lo) && std::isfinite(dist.c_hi);
    add({"B3(ii)", ok ? CheckStatus::Pass : CheckStatus::Fail, mean,
         "c ~ U([" + num(dist.c_lo) + ", " + num(dist.c_hi) + "]), mean " + num(mean)});
  }
  add({"B3(iii)", CheckStatus::Pass, 3.0, "standard normal weights have all moments"});
  add({"B3(iv)", CheckStatus::Pass, 0.0, "standard normal weights have full support"});
  add({"beta", beta > 0.5 && beta < 1.0 ? CheckStatus::Pass : CheckStatus::Fail, beta,
       "scaling exponent must lie in (1/2, 1)"});
  return rep;
}

namespace {

void write_training_outputs(const ExperimentConfig& config, const std::vector<TrainRecord>& records,
                            const NetParams& best) {
  std::filesystem::create_directories(config.output_dir);
  const auto log = config.output_dir / "log.csv";
  {
    std::ofstream out(log);
    if (!out) throw DataError("cannot write " + log.string());
    write_train_header(out);
    for (const auto& r : records) write_train_record(out, r);
  }
  save_params(config.output_dir / "best_params.json", best);
  PlotOptions po;
  po.x_label = "epoch";
  po.y_label = "relative RMSE";
  po.log_y = config.log_y;
  po.title = "Relative RMSE, " + to_string(config.scenario) + ", N = " + std::to_string(config.n);
  plot_csv(log, "epoch", {"rmse_rel"}, po, config.output_dir / "rmse.svg");
  po.title = "Best relative RMSE, " + to_string(config.scenario) + ", N = " + std::to_string(config.n);
  plot_csv(log, "epoch", {"best_rmse"}, po, config.output_dir / "best_rmse.svg");
}

}  // namespace

TrainResult run_training(const ExperimentConfig& config, const Calibration& cal,
                         const TrainOptions& options) {
  NetParams params = init_params(config.n, config.beta, init_distribution(config, config.seed),
                                 config.activation);
  ScheduleConfig sc = config.schedule;
  sc.total_steps = std::max(sc.total_steps, config.epochs);
  Schedule schedule(sc);
  ZClip zclip(config.zclip);
  Optimizer opt(config.optimizer, static_cast<Eigen::Index>(params.flat_size()));

  TrainResult res;
  res.best_params = params;
  res.best_rmse = std::numeric_limits<double>::infinity();
  Eigen::VectorXd theta = params.to_flat();
  try {
    for (int epoch = 0; epoch <= config.epochs; ++epoch) {
      const GradientResult gr = gradient(cal, params);
      if (!std::isfinite(gr.report.j)) throw NumericalError("loss diverged at epoch " + std::to_string(epoch));
      TrainRecord rec;
      rec.epoch = epoch;
      rec.j = gr.report.j;
      rec.rmse_rel = gr.report.rmse_rel;
      rec.grad_norm = gr.grad.norm();
      rec.rate = scaled_rate(schedule.rate(), params.n, params.beta);
      if (rec.rmse_rel < res.best_rmse) {
        res.best_rmse = rec.rmse_rel;
        res.best_params = params;
      }
      rec.best_rmse = res.best_rmse;
      if (epoch < config.epochs) {
        const ZClip::Result clipped = zclip.apply(gr.grad);
        rec.clipped = clipped.clipped;
        opt.step(theta, clipped.grad, rec.rate);
        params.assign_flat(theta);
        schedule.advance(gr.report.j);
      }
      res.records.push_back(rec);
      if (options.on_record) options.on_record(rec);
    }
  } catch (const Error&) {
    if (options.write_outputs) write_training_outputs(config, res.records, res.best_params);
    throw;
  }
  res.final_params = params;
  if (options.write_outputs) write_training_outputs(config, res.records, res.best_params);
  return res;
}

TrainResult run_training(const ExperimentConfig& config, const TrainOptions& options) {
  ScenarioSetup s = build_scenario(config);
  const Calibration cal(std::move(s.problem), s.grid, std::move(s.target));
  return run_training(config, cal, options);
}

std::vector<SweepRow> run_n_sweep(const ExperimentConfig& config, const std::vector<int>& n_list) {
  if (n_list.empty()) throw ConfigError("n_list must not be empty");
  for (int n : n_list) {
    if (n < 1) throw ConfigError("n_list entries must be >= 1");
  }
  ScenarioSetup s = build_scenario(config);
  const Calibration cal(std::move(s.problem), s.grid, std::move(s.target));
  const int seeds = config.seeds_for_averaging;
  const int runs = static_cast<int>(n_list.size()) * seeds;
  std::vector<double> best(runs, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> failure(runs);
  std::filesystem::create_directories(config.output_dir);

#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < runs; ++r) {
    const int idx = r / seeds, k = r % seeds;
    ExperimentConfig rc = config;
    rc.n = n_list[idx];
    rc.seed = config.seed + static_cast<std::uint64_t>(k);
    rc.output_dir = config.output_dir /
                    ("run" + std::to_string(idx) + "_n" + std::to_string(rc.n) + "_seed" + std::to_string(rc.seed));
    try {
      best[r] = run_training(rc, cal).best_rmse;
    } catch (const std::exception& e) {
      failure[r] = e.what();
    }
  }

  std::vector<SweepRow> rows;
  for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
    SweepRow row;
    row.n = n_list[idx];
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < seeds; ++k) {
      const int r = static_cast<int>(idx) * seeds + k;
      if (!failure[r].empty()) {
        row.failures.push_back("seed " + std::to_string(config.seed + k) + ": " + failure[r]);
        continue;
      }
      s1 += best[r];
      s2 += best[r] * best[r];
      ++row.runs;
    }
    if (row.runs > 0) {
      row.mean_best_rmse = s1 / row.runs;
      if (row.runs > 1) {
        const double var = std::max(0.0, (s2 - row.runs * row.mean_best_rmse * row.mean_best_rmse) / (row.runs - 1));
        row.stderr_best_rmse = std::sqrt(var / row.runs);
      }
    } else {
      row.mean_best_rmse = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }

  const auto table = config.output_dir / "sweep.csv";
  {
    std::ofstream out(table);
    if (!out) throw DataError("cannot write " + table.string());
    out.precision(17);
    out << "n,mean_best_rmse,stderr_best_rmse,runs,failed\n";
    for (const auto& r : rows) {
      out << r.n << ',' << r.mean_best_rmse << ',' << r.stderr_best_rmse << ',' << r.runs << ','
          << r.failures.size() << '\n';
    }
  }
  {
    std::ofstream out(config.output_dir / "sweep_failures.txt");
    for (const auto& r : rows) {
      for (const auto& f : r.failures) out << "n=" << r.n << " " << f << '\n';
    }
  }
  PlotOptions po;
  po.title = "Seed-mean best relative RMSE, " + to_string(config.scenario);
  po.x_label = "neurons N";
  po.y_label = "best relative RMSE";
  po.log_y = config.log_y;
  plot_csv(table, "n", {"mean_best_rmse"}, po, config.output_dir / "sweep.svg");
  return rows;
}

LimitSummary run_limit_experiment(const ExperimentConfig& config) {
  const LimitConfig& lc = config.limit;
  if (lc.steps < 1) throw ConfigError("limit.steps must be >= 1");
  ScenarioSetup s = build_scenario(config);
  const Calibration cal(std::move(s.problem), s.grid, std::move(s.target));
  auto kernel = std::make_shared<const KernelOperator>(assemble_kernel(
      init_distribution(config, config.seed), lc.kernel_samples, config.activation, cal.grid()));

  ScheduleConfig sc;
  sc.kind = lc.schedule;
  sc.base_rate = lc.base_rate;
  sc.dtau = lc.dtau;
  const Schedule schedule(sc);
  LimitOptions lo;
  lo.second_level = lc.second_level;
  lo.test_seed = config.seed + 7;
  LimitState state = make_limit_state(cal, kernel, lo);
  run_limit(state, cal, lc.dtau, lc.steps, schedule, lo);

  LimitSummary sum;
  sum.history = state.history;
  sum.kernel_frobenius = weighted_frobenius_norm(*kernel);
  {
    // An independent kernel with M/4 samples: E||B_M' - B_M||^2 = (4 + 1) E||B_M - B||^2.
    const int quarter = std::max(1, lc.kernel_samples / 4);
    KernelOperator diff = assemble_kernel(init_distribution(config, config.seed + 2000), quarter,
                                          config.activation, cal.grid());
    diff.matrix -= kernel->matrix;
    const double ratio = static_cast<double>(lc.kernel_samples) / quarter;
    sum.kernel_mc_error = weighted_frobenius_norm(diff) / std::sqrt(ratio + 1.0);
  }
  if (sum.history.size() >= 3) sum.decay = check_decay_identity(sum.history);
  if (lc.second_level) sum.regularity = check_regularity_bound(sum.history, sum.kernel_frobenius, schedule);

  std::filesystem::create_directories(config.output_dir);
  const auto hist = config.output_dir / "limit_history.csv";
  {
    std::ofstream out(hist);
    if (!out) throw DataError("cannot write " + hist.string());
    write_history_csv(out, sum.history);
  }
  PlotOptions po;
  po.title = "Limit flow, " + to_string(config.scenario);
  po.x_label = "training time tau";
  po.y_label = "J and Q";
  po.log_y = config.log_y;
  plot_csv(hist, "tau", {"J", "Q"}, po, config.output_dir / "limit_history.svg");

  if (!lc.compare_n.empty()) {
    FiniteLimitConfig fc;
    fc.dist = init_distribution(config, config.seed + 1000);
    fc.n_list = lc.compare_n;
    fc.beta = config.beta;
    fc.activation = config.activation;
    fc.schedule = sc;
    fc.checkpoints = lc.checkpoints.empty() ? std::vector<int>{0, lc.steps} : lc.checkpoints;
    fc.seeds = config.seeds_for_averaging;
    sum.comparison = compare_finite_to_limit(cal, kernel, fc);
    std::ofstream out(config.output_dir / "limit_compare.csv");
    out.precision(17);
    out << "n,step,tau,u_l2h1,u_linfl2,uhat_l2h1,uhat_linfl2,g_l2,"
           "se_u_l2h1,se_u_linfl2,se_uhat_l2h1,se_uhat_linfl2,se_g_l2\n";
    for (const auto& r : sum.comparison) {
      out << r.n << ',' << r.step << ',' << r.tau;
      for (int k = 0; k < TrajectoryDistance::kCount; ++k) out << ',' << r.mean[k];
      for (int k = 0; k < TrajectoryDistance::kCount; ++k) out << ',' << r.stderr_[k];
      out << '\n';
    }
  }

  json summary = {{"kernel_samples", lc.kernel_samples},
                  {"kernel_seed", config.seed},
                  {"kernel_frobenius", sum.kernel_frobenius},
                  {"kernel_mc_error_estimate", sum.kernel_mc_error},
                  {"steps", lc.steps},
                  {"dtau", lc.dtau},
                  {"decay_max_rel_discrepancy", sum.decay.max_rel_discrepancy}};
  if (sum.regularity) {
    summary["regularity"] = {{"l_q", sum.regularity->l_q},
                             {"max_ratio", sum.regularity->max_ratio},
                             {"holds", sum.regularity->holds},
                             {"pairs", sum.regularity->pairs},
                             {"max_dq_rel_error", sum.regularity->max_dq_rel_error}};
  }
  std::ofstream(config.output_dir / "limit_summary.json") << summary.dump(2) << '\n';
  return sum;
}

}  // namespace nnpde
