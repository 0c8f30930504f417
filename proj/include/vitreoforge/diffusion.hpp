#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vitreoforge/error.hpp"
#include "vitreoforge/image.hpp"
#include "vitreoforge/rng.hpp"
#include "vitreoforge/schedule.hpp"

namespace vitreoforge {

// What the conditional network is trained to output.
enum class PredictionMode { Velocity, Noise, Direct };

inline std::string to_string(PredictionMode m) {
  switch (m) {
    case PredictionMode::Velocity: return "velocity";
    case PredictionMode::Noise: return "noise";
    case PredictionMode::Direct: return "direct";
  }
  return "?";
}

inline PredictionMode prediction_mode_from_string(const std::string& s) {
  if (s == "velocity") return PredictionMode::Velocity;
  if (s == "noise") return PredictionMode::Noise;
  if (s == "direct" || s == "direct-regression") return PredictionMode::Direct;
  throw InvalidInput("unknown prediction mode '" + s + "' (expected velocity|noise|direct)");
}

namespace detail {

template <Field F>
void require_same_shape(const F& a, const F& b, const char* who) {
  if (!a.same_shape(b)) throw InvalidInput(std::string(who) + ": shape mismatch");
}

// ca * a + cb * b
template <Field F>
F axpby(double ca, const F& a, double cb, const F& b) {
  using T = typename F::value_type;
  F out = a;
  auto o = out.values();
  auto bv = b.values();
  const T fa = static_cast<T>(ca), fb = static_cast<T>(cb);
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fa * o[i] + fb * bv[i];
  return out;
}

template <Field F>
void fill_normal(F& f, Rng& rng) {
  using T = typename F::value_type;
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : f.values()) v = static_cast<T>(n(rng));
}

}  // namespace detail

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
template <Field F>
F forward_sample(const F& x0, std::size_t t, const F& eps, const NoiseSchedule& s) {
  s.check_timestep(t);
  detail::require_same_shape(x0, eps, "forward_sample");
  const double ab = s.alpha_bar(t);
  return detail::axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

// v = sqrt(abar_t) eps - sqrt(1 - abar_t) x0
template <Field F>
F velocity_target(const F& x0, const F& eps, std::size_t t, const NoiseSchedule& s) {
  s.check_timestep(t);
  detail::require_same_shape(x0, eps, "velocity_target");
  const double ab = s.alpha_bar(t);
  return detail::axpby(std::sqrt(ab), eps, -std::sqrt(1.0 - ab), x0);
}

template <Field F>
struct Recovered {
  F x0;
  F eps;
};

// Inverse of (forward_sample, velocity_target): rotates (x_t, v) back to (x0, eps).
template <Field F>
Recovered<F> recover_from_v(const F& x_t, const F& v, std::size_t t, const NoiseSchedule& s) {
  s.check_timestep(t);
  detail::require_same_shape(x_t, v, "recover_from_v");
  const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1.0 - s.alpha_bar(t));
  return {detail::axpby(a, x_t, -b, v), detail::axpby(b, x_t, a, v)};
}

// Noise estimate implied by a clean-image estimate at level t.
template <Field F>
F eps_from_x0(const F& x_t, const F& x0_hat, std::size_t t, const NoiseSchedule& s) {
  const double ab = s.alpha_bar(t);
  return detail::axpby(1.0 / std::sqrt(1.0 - ab), x_t, -std::sqrt(ab) / std::sqrt(1.0 - ab), x0_hat);
}

// One ancestral step:
// x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sigma_t z.
// The noise term is dropped at t = 1.
template <Field F>
F ddpm_step(const F& x_t, const F& eps_hat, std::size_t t, const NoiseSchedule& s, const F& z) {
  s.check_timestep(t);
  detail::require_same_shape(x_t, eps_hat, "ddpm_step");
  const double a = s.alpha(t);
  const double inv = 1.0 / std::sqrt(a);
  F out = detail::axpby(inv, x_t, -inv * (1.0 - a) / std::sqrt(1.0 - s.alpha_bar(t)), eps_hat);
  if (t > 1 && s.sigma(t) > 0.0) {
    detail::require_same_shape(x_t, z, "ddpm_step");
    out = detail::axpby(1.0, out, s.sigma(t), z);
  }
  return out;
}

// Converts a network output into a noise estimate according to the prediction mode.
template <Field F>
F noise_estimate(const F& x_t, const F& prediction, std::size_t t, const NoiseSchedule& s, PredictionMode mode) {
  switch (mode) {
    case PredictionMode::Velocity: return recover_from_v(x_t, prediction, t, s).eps;
    case PredictionMode::Noise: return prediction;
    case PredictionMode::Direct: return eps_from_x0(x_t, prediction, t, s);
  }
  throw InvalidInput("noise_estimate: bad prediction mode");
}

// Conditional ancestral sampler. The denoiser sees x_t stacked with y along the
// channel axis and returns a single-plane prediction for timestep t:
//   denoiser(const Tensor<T>& stacked, std::size_t t) -> Image<T>
// The result is clamped to [0,1] once, after the full chain.
template <typename T, typename Denoiser>
Image<T> cddpm_sample(Denoiser&& denoiser, const Image<T>& y, const NoiseSchedule& s, std::uint64_t seed,
                      PredictionMode mode = PredictionMode::Velocity) {
  Rng rng = make_rng(seed);
  Image<T> x(y.height(), y.width());
  detail::fill_normal(x, rng);
  Image<T> z(y.height(), y.width());
  for (std::size_t t = s.steps(); t >= 1; --t) {
    const Tensor<T> stacked = stack_channels<T>({&x, &y});
    const Image<T> pred = denoiser(stacked, t);
    if (!pred.same_shape(y))
      throw InvalidInput("cddpm_sample: denoiser output " + std::to_string(pred.height()) + "x" +
                         std::to_string(pred.width()) + " does not match conditioning image");
    const Image<T> eps_hat = noise_estimate(x, pred, t, s, mode);
    if (t > 1) detail::fill_normal(z, rng);
    x = ddpm_step(x, eps_hat, t, s, z);
  }
  return clamp_unit(std::move(x));
}

// x_t = (1 - m_t) lx0 + m_t ly + sqrt(delta_t) eps
template <Field F>
F bridge_forward(const F& lx0, const F& ly, std::size_t t, const BridgeSchedule& b, const F& eps) {
  b.check_timestep(t);
  detail::require_same_shape(lx0, ly, "bridge_forward");
  detail::require_same_shape(lx0, eps, "bridge_forward");
  const double m = b.m(t);
  F out = detail::axpby(1.0 - m, lx0, m, ly);
  return detail::axpby(1.0, out, std::sqrt(b.delta(t)), eps);
}

// The bracket m_t (ly - lx0) + sqrt(delta_t) eps, so that bridge_forward = lx0 + target.
template <Field F>
F bbdm_target(const F& lx0, const F& ly, std::size_t t, const BridgeSchedule& b, const F& eps) {
  b.check_timestep(t);
  detail::require_same_shape(lx0, ly, "bbdm_target");
  detail::require_same_shape(lx0, eps, "bbdm_target");
  const double m = b.m(t);
  F out = detail::axpby(m, ly, -m, lx0);
  return detail::axpby(1.0, out, std::sqrt(b.delta(t)), eps);
}

// Evenly spaced decreasing grid T = t_0 > ... > t_n = 0 with n_steps intervals.
inline std::vector<std::size_t> bridge_timesteps(std::size_t total_steps, std::size_t n_steps) {
  if (n_steps < 1) throw InvalidInput("bridge sampler: n_steps must be >= 1");
  if (n_steps > total_steps) throw InvalidInput("bridge sampler: n_steps exceeds T");
  std::vector<std::size_t> grid(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k)
    grid[k] = static_cast<std::size_t>(
        std::llround(static_cast<double>(total_steps) * static_cast<double>(n_steps - k) / static_cast<double>(n_steps)));
  return grid;
}

// Deterministic bridge reverse starting at x_T = ly. At each grid pair (t, s):
// predict the bracket, reconstruct x0, recover the implied unit residual and
// re-noise to level s. denoiser(const F& x_t, std::size_t t) -> F.
template <Field F, typename Denoiser>
F bbdm_sample(Denoiser&& denoiser, const F& ly, const BridgeSchedule& b, std::size_t n_steps) {
  const auto grid = bridge_timesteps(b.steps(), n_steps);
  F x = ly;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const std::size_t t = grid[k], s = grid[k + 1];
    const F b_hat = denoiser(x, t);
    detail::require_same_shape(x, b_hat, "bbdm_sample");
    const F x0_hat = detail::axpby(1.0, x, -1.0, b_hat);
    const double mt = b.m(t), dt = b.delta(t), ms = b.m(s), ds = b.delta(s);
    F next = detail::axpby(1.0 - ms, x0_hat, ms, ly);
    if (dt > 0.0 && ds > 0.0) {
      F mean_t = detail::axpby(1.0 - mt, x0_hat, mt, ly);
      F resid = detail::axpby(1.0 / std::sqrt(dt), x, -1.0 / std::sqrt(dt), mean_t);
      next = detail::axpby(1.0, next, std::sqrt(ds), resid);
    }
    x = std::move(next);
  }
  return x;
}

}  // namespace vitreoforge
