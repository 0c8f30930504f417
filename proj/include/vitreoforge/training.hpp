#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vitreoforge/denoiser.hpp"
#include "vitreoforge/nn/optim.hpp"

namespace vitreoforge {

enum class LossType { L2, L1 };

inline std::string to_string(LossType l) { return l == LossType::L2 ? "l2" : "l1"; }

inline LossType loss_type_from_string(const std::string& s) {
  if (s == "l2" || s == "L2" || s == "mse") return LossType::L2;
  if (s == "l1" || s == "L1" || s == "mae") return LossType::L1;
  throw InvalidInput("unknown loss type '" + s + "' (expected l2|l1)");
}

enum class OptimizerKind { AdamW, Adam };

inline std::string to_string(OptimizerKind o) { return o == OptimizerKind::AdamW ? "adamw" : "adam"; }

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adamw" || s == "AdamW") return OptimizerKind::AdamW;
  if (s == "adam" || s == "Adam") return OptimizerKind::Adam;
  throw InvalidInput("unknown optimizer '" + s + "' (expected adamw|adam)");
}

struct TrainConfig {
  double learning_rate = 2e-5;
  double weight_decay = 0.01;
  double dropout = 0.1;
  double ema_decay = 0.9999;
  std::size_t steps = 1000;
  std::size_t batch_size = 1;
  // Square random crop per sample; 0 trains on full images.
  std::size_t patch_size = 0;
  LossType loss = LossType::L2;
  PredictionMode prediction = PredictionMode::Velocity;
  OptimizerKind optimizer = OptimizerKind::AdamW;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    using detail::require;
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "train: learning rate must be positive");
    require(weight_decay >= 0.0, "train: weight decay must be >= 0");
    require(dropout >= 0.0 && dropout < 1.0, "train: dropout must lie in [0, 1)");
    require(ema_decay >= 0.0 && ema_decay <= 1.0, "train: EMA decay must lie in [0, 1]");
    require(steps >= 1, "train: need at least one step");
    require(batch_size >= 1, "train: batch size must be >= 1");
    require(grad_clip >= 0.0, "train: gradient clip must be >= 0");
  }
};

// Per-model defaults from the reference configuration table.
inline TrainConfig default_train_config(ModelKind kind) {
  TrainConfig c;
  switch (kind) {
    case ModelKind::Regression:
      c.prediction = PredictionMode::Direct;
      break;
    case ModelKind::Cddpm:
      break;
    case ModelKind::Bbdm:
      c.optimizer = OptimizerKind::Adam;
      c.dropout = 0.0;
      c.loss = LossType::L1;
      c.ema_decay = 0.995;
      break;
  }
  return c;
}

struct TrainPair {
  ImageTensor y;   // low-quality input
  ImageTensor x0;  // target
};

struct TrainProgress {
  std::size_t step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  DenoiserParams params;
  DenoiserParams ema;
  std::vector<double> losses;  // one per optimizer step
};

using ProgressFn = std::function<void(const TrainProgress&)>;

namespace detail {

struct Sample {
  Tensor<float> input;
  std::optional<double> t;
  Tensor<float> target;
  std::size_t timestep = 0;
};

template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::size_t r0, std::size_t c0, std::size_t size) {
  Tensor<T> out(x.channels(), size, size);
  for (std::size_t ch = 0; ch < x.channels(); ++ch)
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c) out(ch, r, c) = x(ch, r0 + r, c0 + c);
  return out;
}

inline double loss_and_grad(const Tensor<float>& pred, const Tensor<float>& target, LossType type,
                            Tensor<float>& grad) {
  grad = Tensor<float>(pred.channels(), pred.height(), pred.width());
  const double n = static_cast<double>(pred.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    if (type == LossType::L2) {
      loss += d * d;
      grad[i] = static_cast<float>(2.0 * d / n);
    } else {
      loss += std::abs(d);
      grad[i] = static_cast<float>((d > 0) - (d < 0)) / static_cast<float>(n);
    }
  }
  return loss / n;
}

inline void check_pairs(const std::vector<TrainPair>& pairs, std::size_t divisor, std::size_t patch) {
  if (pairs.empty()) throw InvalidInput("train: no training pairs");
  const auto& first = pairs.front().y;
  for (const auto& p : pairs) {
    if (!p.y.same_shape(first) || !p.x0.same_shape(first)) throw InvalidInput("train: pair shapes differ");
    if (!all_finite(p.y) || !all_finite(p.x0)) throw InvalidInput("train: non-finite pixel in training data");
  }
  const std::size_t h = patch ? patch : first.height(), w = patch ? patch : first.width();
  if (patch && (patch > first.height() || patch > first.width())) throw InvalidInput("train: patch larger than images");
  if (h % divisor || w % divisor)
    throw InvalidInput("train: training size must be a multiple of " + std::to_string(divisor));
}

// Shared loop: builds one sample per batch element, accumulates gradients,
// clips, steps the optimizer and updates the EMA copy.
template <typename MakeSample>
TrainResult run_training(DenoiserParams init, const TrainConfig& cfg, MakeSample&& make_sample,
                         const ProgressFn& progress) {
  cfg.validate();
  const nn::UNet net(init.arch);
  DenoiserParams ema = init;
  nn::Adam opt(nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay,
                              cfg.optimizer == OptimizerKind::AdamW});
  Rng data_rng = make_rng(derive_seed(cfg.seed, 2));
  Rng drop_rng = make_rng(derive_seed(cfg.seed, 3));
  TrainResult res{std::move(init), {}, {}};
  res.losses.reserve(cfg.steps);
  auto& w = res.params.weights;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    w.zero_grad();
    double loss = 0.0;
    std::size_t last_t = 0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      Sample s = make_sample(data_rng);
      last_t = s.timestep;
      nn::UNet::Cache<float> cache;
      const nn::RunContext ctx{true, cfg.dropout, &drop_rng};
      const Tensor<float> pred = net.forward(w, s.input, s.t, ctx, &cache);
      Tensor<float> g;
      loss += loss_and_grad(pred, s.target, cfg.loss, g);
      if (cfg.batch_size > 1)
        for (auto& v : g.values()) v /= static_cast<float>(cfg.batch_size);
      net.backward(w, cache, g);
    }
    loss /= static_cast<double>(cfg.batch_size);
    const double gnorm = nn::clip_grad_norm(w, cfg.grad_clip);
    if (!std::isfinite(loss) || !std::isfinite(gnorm)) {
      std::ostringstream msg;
      msg << "training diverged at step " << step + 1 << " of " << cfg.steps << ": loss=" << loss
          << " grad_norm=" << gnorm << " timestep=" << last_t << " lr=" << cfg.learning_rate
          << " model=" << to_string(res.params.kind);
      throw Diverged(msg.str());
    }
    opt.step(w);
    nn::ema_update(ema.weights.weights(), w.weights(), cfg.ema_decay);
    res.losses.push_back(loss);
    if (progress) progress({step + 1, loss, gnorm});
  }
  res.ema = std::move(ema);
  return res;
}

inline std::pair<std::size_t, std::size_t> random_corner(const ImageTensor& img, std::size_t patch, Rng& rng) {
  if (patch == 0) return {0, 0};
  std::uniform_int_distribution<std::size_t> r(0, img.height() - patch), c(0, img.width() - patch);
  const std::size_t r0 = r(rng);
  return {r0, c(rng)};
}

inline Tensor<float> noise_like(std::size_t ch, std::size_t h, std::size_t w, Rng& rng) {
  Tensor<float> t(ch, h, w);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : t.values()) v = static_cast<float>(n(rng));
  return t;
}

}  // namespace detail

// Conditional diffusion: t ~ U{1..T}, eps ~ N(0, I), input x_t stacked with y,
// target chosen by cfg.prediction.
inline TrainResult train_cddpm(const std::vector<TrainPair>& pairs, const nn::Architecture& arch,
                               ProcessConfig process, const TrainConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  process.prediction = cfg.prediction;
  DenoiserParams init = init_params(ModelKind::Cddpm, arch, process, derive_seed(cfg.seed, 1));
  detail::check_pairs(pairs, arch.spatial_divisor(), cfg.patch_size);
  const NoiseSchedule sched = process.noise_schedule();
  std::vector<Tensor<float>> ys, xs;
  for (const auto& p : pairs) {
    ys.push_back(to_tensor(p.y.cast<float>()));
    xs.push_back(to_tensor(p.x0.cast<float>()));
  }
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1), tdist(1, sched.steps());
  auto make = [&](Rng& rng) {
    const std::size_t i = pick(rng);
    const auto [r0, c0] = detail::random_corner(pairs[i].y, cfg.patch_size, rng);
    const std::size_t ps = cfg.patch_size;
    const Tensor<float> y = ps ? detail::crop(ys[i], r0, c0, ps) : ys[i];
    const Tensor<float> x0 = ps ? detail::crop(xs[i], r0, c0, ps) : xs[i];
    const std::size_t t = tdist(rng);
    const Tensor<float> eps = detail::noise_like(1, x0.height(), x0.width(), rng);
    const Tensor<float> xt = forward_sample(x0, t, eps, sched);
    Tensor<float> target;
    switch (cfg.prediction) {
      case PredictionMode::Velocity: target = velocity_target(x0, eps, t, sched); break;
      case PredictionMode::Noise: target = eps; break;
      case PredictionMode::Direct: target = x0; break;
    }
    return detail::Sample{nn::concat_channels(xt, y), static_cast<double>(t), std::move(target), t};
  };
  return detail::run_training(std::move(init), cfg, make, progress);
}

// Direct low-quality -> target regression without a timestep.
inline TrainResult train_regression_baseline(const std::vector<TrainPair>& pairs, const nn::Architecture& arch,
                                             const TrainConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  ProcessConfig process;
  process.prediction = PredictionMode::Direct;
  DenoiserParams init = init_params(ModelKind::Regression, arch, process, derive_seed(cfg.seed, 1));
  detail::check_pairs(pairs, arch.spatial_divisor(), cfg.patch_size);
  std::vector<Tensor<float>> ys, xs;
  for (const auto& p : pairs) {
    ys.push_back(to_tensor(p.y.cast<float>()));
    xs.push_back(to_tensor(p.x0.cast<float>()));
  }
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  auto make = [&](Rng& rng) {
    const std::size_t i = pick(rng);
    const auto [r0, c0] = detail::random_corner(pairs[i].y, cfg.patch_size, rng);
    const std::size_t ps = cfg.patch_size;
    return detail::Sample{ps ? detail::crop(ys[i], r0, c0, ps) : ys[i], std::nullopt,
                          ps ? detail::crop(xs[i], r0, c0, ps) : xs[i], 0};
  };
  return detail::run_training(std::move(init), cfg, make, progress);
}

// Brownian bridge in the codec's latent space: t ~ U{1..T}, target is the bracket b_t.
inline TrainResult train_bbdm(const std::vector<TrainPair>& pairs, const nn::Architecture& arch,
                              const ProcessConfig& process, const TrainConfig& cfg,
                              const LatentCodec& codec = IdentityCodec{}, const ProgressFn& progress = {}) {
  cfg.validate();
  if (cfg.patch_size != 0) throw InvalidInput("train_bbdm: patch training is not supported in latent space");
  DenoiserParams init = init_params(ModelKind::Bbdm, arch, process, derive_seed(cfg.seed, 1));
  detail::check_pairs(pairs, 1, 0);
  const BridgeSchedule sched = process.bridge_schedule();
  std::vector<Tensor<float>> lys, lxs;
  for (const auto& p : pairs) {
    lys.push_back(codec.encode(p.y));
    lxs.push_back(codec.encode(p.x0));
  }
  const auto& l0 = lys.front();
  if (l0.channels() != arch.in_channels)
    throw InvalidInput("train_bbdm: codec latent has " + std::to_string(l0.channels()) + " channels, model expects " +
                       std::to_string(arch.in_channels));
  if (l0.height() % arch.spatial_divisor() || l0.width() % arch.spatial_divisor())
    throw InvalidInput("train_bbdm: latent size must be a multiple of " + std::to_string(arch.spatial_divisor()));
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1), tdist(1, sched.steps());
  auto make = [&](Rng& rng) {
    const std::size_t i = pick(rng);
    const std::size_t t = tdist(rng);
    const Tensor<float> eps = detail::noise_like(l0.channels(), l0.height(), l0.width(), rng);
    Tensor<float> xt = bridge_forward(lxs[i], lys[i], t, sched, eps);
    Tensor<float> target = bbdm_target(lxs[i], lys[i], t, sched, eps);
    return detail::Sample{std::move(xt), static_cast<double>(t), std::move(target), t};
  };
  return detail::run_training(std::move(init), cfg, make, progress);
}

}  // namespace vitreoforge
