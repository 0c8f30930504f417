#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "vitreoforge/nn/params.hpp"

namespace vitreoforge::nn {

struct AdamConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // true: decoupled decay (AdamW); false: decay added to the gradient (Adam + L2).
  bool decoupled = true;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(const AdamConfig& cfg) : cfg_(cfg) {}

  const AdamConfig& config() const noexcept { return cfg_; }
  std::size_t steps() const noexcept { return t_; }

  void step(ParamStore<float>& p) {
    auto& w = p.weights();
    const auto& g = p.grads();
    if (m_.size() != w.size()) {
      m_.assign(w.size(), 0.0f);
      v_.assign(w.size(), 0.0f);
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < w.size(); ++i) {
      double gi = g[i];
      if (!cfg_.decoupled) gi += cfg_.weight_decay * w[i];
      const double m = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * gi;
      const double v = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * gi * gi;
      m_[i] = static_cast<float>(m);
      v_[i] = static_cast<float>(v);
      double wi = w[i];
      if (cfg_.decoupled) wi -= cfg_.lr * cfg_.weight_decay * wi;
      wi -= cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
      w[i] = static_cast<float>(wi);
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<float> m_, v_;
  std::size_t t_ = 0;
};

inline double grad_norm(const ParamStore<float>& p) {
  double s = 0.0;
  for (float g : p.grads()) s += static_cast<double>(g) * g;
  return std::sqrt(s);
}

// Rescales gradients to at most max_norm; returns the norm before clipping.
inline double clip_grad_norm(ParamStore<float>& p, double max_norm) {
  const double n = grad_norm(p);
  if (max_norm > 0.0 && n > max_norm) {
    const auto s = static_cast<float>(max_norm / n);
    for (float& g : p.grads()) g *= s;
  }
  return n;
}

// ema <- d * ema + (1 - d) * w
inline void ema_update(std::span<float> ema, std::span<const float> w, double decay) {
  for (std::size_t i = 0; i < ema.size(); ++i)
    ema[i] = static_cast<float>(decay * ema[i] + (1.0 - decay) * w[i]);
}

}  // namespace vitreoforge::nn
