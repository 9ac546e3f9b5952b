#include "nnpde/optimizers.hpp"

#include <algorithm>
#include <cmath>

#include "nnpde/errors.hpp"

namespace nnpde {

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "constant") return ScheduleKind::Constant;
  if (s == "robbins_monro") return ScheduleKind::RobbinsMonro;
  if (s == "plateau") return ScheduleKind::Plateau;
  throw ConfigError("unknown schedule kind '" + s + "'");
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::RobbinsMonro: return "robbins_monro";
    case ScheduleKind::Plateau: return "plateau";
  }
  return "?";
}

Schedule::Schedule(const ScheduleConfig& config) : config_(config) {
  if (!(config_.base_rate > 0.0)) throw ConfigError("schedule base_rate must be positive");
  if (!(config_.dtau > 0.0)) throw ConfigError("schedule dtau must be positive");
  if (config_.kind == ScheduleKind::Plateau) {
    if (!(config_.factor > 0.0 && config_.factor < 1.0)) {
      throw ConfigError("plateau factor must lie in (0, 1)");
    }
    if (config_.patience < 1) throw ConfigError("plateau patience must be >= 1");
    if (config_.patience_decay && config_.total_steps < 1) {
      throw ConfigError("patience decay needs total_steps >= 1");
    }
  }
}

double Schedule::rate_at(int step) const {
  switch (config_.kind) {
    case ScheduleKind::Constant: return config_.base_rate;
    case ScheduleKind::RobbinsMonro: return config_.base_rate / (1.0 + step * config_.dtau);
    case ScheduleKind::Plateau: return config_.base_rate * std::pow(config_.factor, reductions_);
  }
  return config_.base_rate;
}

double Schedule::rate() const { return rate_at(step_); }

double Schedule::rate_at_tau(double tau) const {
  switch (config_.kind) {
    case ScheduleKind::Constant: return config_.base_rate;
    case ScheduleKind::RobbinsMonro: return config_.base_rate / (1.0 + tau);
    case ScheduleKind::Plateau: break;
  }
  throw ConfigError("the plateau schedule has no rate as a function of training time");
}

double Schedule::integral(double tau1, double tau2) const {
  switch (config_.kind) {
    case ScheduleKind::Constant: return config_.base_rate * (tau2 - tau1);
    case ScheduleKind::RobbinsMonro:
      return config_.base_rate * std::log((1.0 + tau2) / (1.0 + tau1));
    case ScheduleKind::Plateau: break;
  }
  throw ConfigError("closed-form rate integral is not defined for the plateau schedule");
}

int Schedule::current_patience() const {
  if (!config_.patience_decay) return config_.patience;
  const double frac = 1.0 - static_cast<double>(step_) / config_.total_steps;
  const int p = static_cast<int>(std::lround(config_.patience * std::max(0.0, frac)));
  return std::max(config_.patience_min, p);
}

void Schedule::advance(double monitored) {
  if (config_.kind == ScheduleKind::Plateau) {
    if (monitored < best_ * (1.0 - config_.threshold)) {
      best_ = monitored;
      bad_steps_ = 0;
    } else if (++bad_steps_ >= current_patience()) {
      ++reductions_;
      bad_steps_ = 0;
    }
  }
  ++step_;
}

double scaled_rate(double alpha, int n, double beta) {
  return alpha * std::pow(static_cast<double>(n), 2.0 * beta - 1.0);
}

ZClip::Result ZClip::clip_with(const Stats& stats, double z_threshold, const Eigen::VectorXd& grad) {
  Result r{grad, false, 0.0};
  const double norm = grad.norm();
  const double sd = std::sqrt(std::max(0.0, stats.var));
  if (sd > 0.0) {
    r.z = (norm - stats.mean) / sd;
  } else {
    r.z = norm > stats.mean ? std::numeric_limits<double>::infinity() : 0.0;
  }
  const double target = stats.mean + z_threshold * sd;
  // The relative slack keeps an already-clipped gradient (norm == target up to rounding)
  // from being rescaled again.
  if (r.z > z_threshold && norm > target * (1.0 + 1e-12) && norm > 0.0) {
    r.grad *= target / norm;
    r.clipped = true;
  }
  return r;
}

void ZClip::update(double norm) {
  if (count_ == 0) {
    stats_.mean = norm;
    stats_.var = 0.0;
  } else {
    const double a = config_.alpha;
    stats_.mean = a * stats_.mean + (1.0 - a) * norm;
    const double dev = norm - stats_.mean;
    stats_.var = a * stats_.var + (1.0 - a) * dev * dev;
  }
  ++count_;
}

ZClip::Result ZClip::apply(const Eigen::VectorXd& grad) {
  if (!grad.allFinite()) throw NumericalError("non-finite gradient passed to ZClip");
  Result r{grad, false, 0.0};
  if (config_.enabled && count_ >= config_.warmup) {
    r = clip_with(stats_, config_.z_threshold, grad);
  }
  update(r.grad.norm());
  return r;
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "gd") return OptimizerKind::GD;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected gd or adam)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::GD ? "gd" : "adam"; }

Optimizer::Optimizer(const OptimizerConfig& config, Eigen::Index size)
    : config_(config), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {
  if (!(config_.epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0 && config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
}

void Optimizer::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double rate) {
  if (theta.size() != grad.size() || theta.size() != m_.size()) {
    throw StructuralError("optimizer step: parameter/gradient size mismatch");
  }
  ++t_;
  if (config_.kind == OptimizerKind::GD) {
    theta -= rate * grad;
    return;
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  theta.array() -= rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
}

}  // namespace nnpde
