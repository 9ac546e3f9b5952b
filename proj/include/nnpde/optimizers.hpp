#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>

namespace nnpde {

enum class ScheduleKind { Constant, RobbinsMonro, Plateau };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::Plateau;
  double base_rate = 0.01;
  // Training time advanced per step; robbins_monro uses alpha = base / (1 + step * dtau).
  double dtau = 1.0;
  // Plateau reduction.
  double factor = 0.95;
  int patience = 100;
  double threshold = 1e-4;  // relative improvement required to reset the patience counter
  // Optional linear decay of patience over total_steps, floored at patience_min.
  bool patience_decay = false;
  int patience_min = 10;
  int total_steps = 0;
};

// Learning-rate schedule alpha_tau, before the width scaling.
class Schedule {
 public:
  explicit Schedule(const ScheduleConfig& config);

  const ScheduleConfig& config() const { return config_; }
  int step() const { return step_; }
  double tau() const { return step_ * config_.dtau; }
  int reductions() const { return reductions_; }

  // Rate for the current step.
  double rate() const;
  // Rate at an arbitrary step, for kinds that do not depend on monitored values.
  double rate_at(int step) const;
  // alpha_tau for constant and robbins_monro.
  double rate_at_tau(double tau) const;
  // Exact integral of alpha over [tau1, tau2] for constant and robbins_monro.
  double integral(double tau1, double tau2) const;

  // Patience in effect at the current step.
  int current_patience() const;

  // Move to the next step; `monitored` feeds the plateau rule.
  void advance(double monitored);

 private:
  ScheduleConfig config_;
  int step_ = 0;
  int reductions_ = 0;
  int bad_steps_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

// alpha * N^(2 beta - 1): the width-scaled rate alpha / N^(1 - 2 beta).
double scaled_rate(double alpha, int n, double beta);

struct ZClipConfig {
  bool enabled = true;
  double alpha = 0.98;  // EMA smoothing
  double z_threshold = 0.4;
  int warmup = 25;
};

// Gradient-norm clipping on the z-score of the norm against EMA mean and variance.
class ZClip {
 public:
  struct Stats {
    double mean = 0.0;
    double var = 0.0;
  };
  struct Result {
    Eigen::VectorXd grad;
    bool clipped = false;
    double z = 0.0;
  };

  explicit ZClip(const ZClipConfig& config) : config_(config) {}

  // Clips (after warmup) and then feeds the post-clip norm into the EMAs.
  Result apply(const Eigen::VectorXd& grad);

  // Clipping decision against fixed statistics, without updating them.
  static Result clip_with(const Stats& stats, double z_threshold, const Eigen::VectorXd& grad);

  const Stats& stats() const { return stats_; }
  int count() const { return count_; }

 private:
  void update(double norm);

  ZClipConfig config_;
  Stats stats_;
  int count_ = 0;
};

enum class OptimizerKind { GD, Adam };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, Eigen::Index size);

  // theta <- theta - rate * direction, direction = grad for GD and the bias-corrected
  // moment ratio for Adam.
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double rate);

  const OptimizerConfig& config() const { return config_; }
  long long steps() const { return t_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

 private:
  OptimizerConfig config_;
  Eigen::VectorXd m_, v_;
  long long t_ = 0;
};

}  // namespace nnpde
