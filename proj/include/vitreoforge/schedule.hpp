#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vitreoforge/error.hpp"

namespace vitreoforge {

// Std of the fresh noise injected by each ancestral step.
enum class SigmaMode {
  Beta,       // sigma_t^2 = beta_t
  Posterior,  // sigma_t^2 = (1 - abar_{t-1}) / (1 - abar_t) * beta_t
  Zero,       // deterministic reverse chain
};

inline std::string to_string(SigmaMode m) {
  switch (m) {
    case SigmaMode::Beta: return "beta";
    case SigmaMode::Posterior: return "posterior";
    case SigmaMode::Zero: return "zero";
  }
  return "?";
}

inline SigmaMode sigma_mode_from_string(const std::string& s) {
  if (s == "beta") return SigmaMode::Beta;
  if (s == "posterior") return SigmaMode::Posterior;
  if (s == "zero") return SigmaMode::Zero;
  throw InvalidInput("unknown sigma convention '" + s + "' (expected beta|posterior|zero)");
}

// Forward-process variances indexed by timestep t = 1..T; alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  static NoiseSchedule from_betas(std::vector<double> betas, SigmaMode mode = SigmaMode::Beta) {
    if (betas.empty()) throw InvalidInput("noise schedule: need at least one timestep");
    for (double b : betas)
      if (!(b > 0.0 && b < 1.0)) throw InvalidInput("noise schedule: beta must lie in (0, 1)");
    NoiseSchedule s;
    s.mode_ = mode;
    s.beta_ = std::move(betas);
    const std::size_t T = s.beta_.size();
    s.alpha_.resize(T);
    s.alpha_bar_.resize(T);
    s.sigma_.resize(T);
    double prod = 1.0;
    for (std::size_t i = 0; i < T; ++i) {
      s.alpha_[i] = 1.0 - s.beta_[i];
      prod *= s.alpha_[i];
      s.alpha_bar_[i] = prod;
    }
    for (std::size_t i = 0; i < T; ++i) {
      const double prev = i == 0 ? 1.0 : s.alpha_bar_[i - 1];
      double var = 0.0;
      if (i > 0) {
        if (mode == SigmaMode::Beta) var = s.beta_[i];
        if (mode == SigmaMode::Posterior) var = (1.0 - prev) / (1.0 - s.alpha_bar_[i]) * s.beta_[i];
      }
      s.sigma_[i] = std::sqrt(var);
    }
    return s;
  }

  std::size_t steps() const noexcept { return beta_.size(); }
  SigmaMode sigma_mode() const noexcept { return mode_; }

  double beta(std::size_t t) const { return beta_.at(index(t)); }
  double alpha(std::size_t t) const { return alpha_.at(index(t)); }
  double alpha_bar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bar_.at(index(t)); }
  double sigma(std::size_t t) const { return sigma_.at(index(t)); }

  const std::vector<double>& betas() const noexcept { return beta_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bar_; }

  void check_timestep(std::size_t t) const {
    if (t < 1 || t > steps())
      throw InvalidInput("timestep " + std::to_string(t) + " outside 1.." + std::to_string(steps()));
  }

 private:
  std::size_t index(std::size_t t) const {
    check_timestep(t);
    return t - 1;
  }

  SigmaMode mode_ = SigmaMode::Beta;
  std::vector<double> beta_, alpha_, alpha_bar_, sigma_;
};

// beta_t = start + (t-1)/(T-1) * (end - start)
inline NoiseSchedule linear_beta_schedule(std::size_t steps, double beta_start = 1e-4, double beta_end = 0.02,
                                          SigmaMode mode = SigmaMode::Beta) {
  if (steps < 1) throw InvalidInput("linear_beta_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw InvalidInput("linear_beta_schedule: need 0 < beta_start <= beta_end < 1");
  std::vector<double> b(steps);
  if (steps == 1) {
    b[0] = beta_start;
  } else {
    for (std::size_t i = 0; i < steps; ++i)
      b[i] = beta_start + static_cast<double>(i) / static_cast<double>(steps - 1) * (beta_end - beta_start);
  }
  return NoiseSchedule::from_betas(std::move(b), mode);
}

// Brownian-bridge coefficients: m_t = t/T, delta_t = 2 (m_t - m_t^2), t = 0..T.
class BridgeSchedule {
 public:
  BridgeSchedule() = default;
  explicit BridgeSchedule(std::size_t steps) : steps_(steps) {
    if (steps < 1) throw InvalidInput("bridge schedule: T must be >= 1");
  }

  std::size_t steps() const noexcept { return steps_; }

  double m(std::size_t t) const {
    check_timestep(t);
    return static_cast<double>(t) / static_cast<double>(steps_);
  }

  double delta(std::size_t t) const {
    const double mt = m(t);
    return 2.0 * (mt - mt * mt);
  }

  void check_timestep(std::size_t t) const {
    if (t > steps_) throw InvalidInput("bridge timestep " + std::to_string(t) + " outside 0.." + std::to_string(steps_));
  }

 private:
  std::size_t steps_ = 1000;
};

}  // namespace vitreoforge
