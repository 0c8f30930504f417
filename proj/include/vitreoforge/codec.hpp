#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vitreoforge/image.hpp"
#include "vitreoforge/nn/layers.hpp"
#include "vitreoforge/nn/optim.hpp"

namespace vitreoforge {

struct LatentShape {
  std::size_t channels = 1, height = 0, width = 0;
  bool operator==(const LatentShape&) const = default;
};

// Maps images to the space the bridge process runs in.
class LatentCodec {
 public:
  virtual ~LatentCodec() = default;
  virtual std::string name() const = 0;
  virtual LatentShape latent_shape(std::size_t height, std::size_t width) const = 0;
  virtual Tensor<float> encode(const ImageTensor& img) const = 0;
  virtual ImageTensor decode(const Tensor<float>& latent) const = 0;
  // Declared bound on mean squared reconstruction error.
  virtual double tolerance() const = 0;
};

class IdentityCodec final : public LatentCodec {
 public:
  std::string name() const override { return "identity"; }
  LatentShape latent_shape(std::size_t h, std::size_t w) const override { return {1, h, w}; }
  Tensor<float> encode(const ImageTensor& img) const override { return to_tensor(img.cast<float>()); }
  ImageTensor decode(const Tensor<float>& latent) const override {
    if (latent.channels() != 1) throw InvalidInput("identity codec: latent must have one channel");
    return to_image(latent).cast<double>();
  }
  double tolerance() const override { return 0.0; }
};

inline std::shared_ptr<const LatentCodec> identity_codec() { return std::make_shared<IdentityCodec>(); }

struct AutoencoderConfig {
  std::size_t hidden_channels = 8;
  std::size_t latent_channels = 4;
  std::size_t steps = 1500;
  double learning_rate = 5e-3;
  // Training fails if the final mean reconstruction MSE is above this.
  double mse_threshold = 1e-3;
  std::uint64_t seed = 0;
};

// Encoder: conv3 -> SiLU -> 2x2 pool -> conv3. Decoder: upsample -> conv3 -> SiLU -> conv3.
class TinyAutoencoder final : public LatentCodec {
 public:
  explicit TinyAutoencoder(const AutoencoderConfig& cfg) : cfg_(cfg) {
    detail::require(cfg.hidden_channels > 0 && cfg.latent_channels > 0, "autoencoder: zero channel count");
    e1_ = nn::Conv2d(layout_, 1, cfg.hidden_channels, 3);
    e2_ = nn::Conv2d(layout_, cfg.hidden_channels, cfg.latent_channels, 3);
    d1_ = nn::Conv2d(layout_, cfg.latent_channels, cfg.hidden_channels, 3);
    d2_ = nn::Conv2d(layout_, cfg.hidden_channels, 1, 3);
    params_ = nn::ParamStore<float>(layout_.total());
    params_.initialize(layout_, cfg.seed);
  }

  std::string name() const override { return "tiny-autoencoder"; }
  LatentShape latent_shape(std::size_t h, std::size_t w) const override {
    return {cfg_.latent_channels, h / 2, w / 2};
  }
  double tolerance() const override { return tolerance_; }

  Tensor<float> encode(const ImageTensor& img) const override {
    check_even(img.height(), img.width());
    return encode_impl(to_tensor(img.cast<float>()), nullptr);
  }

  ImageTensor decode(const Tensor<float>& z) const override {
    if (z.channels() != cfg_.latent_channels) throw InvalidInput("autoencoder: latent channel mismatch");
    return to_image(decode_impl(z, nullptr)).cast<double>();
  }

  // Adam on the mean squared reconstruction error, one random image per step.
  double fit(const std::vector<ImageTensor>& images) {
    if (images.empty()) throw InvalidInput("autoencoder: empty training set");
    for (const auto& im : images) check_even(im.height(), im.width());
    nn::Adam opt(nn::AdamConfig{cfg_.learning_rate, 0.9, 0.999, 1e-8, 0.0, true});
    Rng rng = make_rng(derive_seed(cfg_.seed, 1));
    std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
    std::vector<Tensor<float>> xs;
    for (const auto& im : images) xs.push_back(to_tensor(im.cast<float>()));
    for (std::size_t step = 0; step < cfg_.steps; ++step) {
      const Tensor<float>& x = xs[pick(rng)];
      Caches c;
      const Tensor<float> y = decode_impl(encode_impl(x, &c), &c);
      Tensor<float> g(1, x.height(), x.width());
      const float scale = 2.0f / static_cast<float>(x.size());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (y[i] - x[i]);
      params_.zero_grad();
      backward(c, g);
      nn::clip_grad_norm(params_, 1.0);
      opt.step(params_);
    }
    double total = 0.0;
    for (const auto& im : images) total += reconstruction_mse(im);
    tolerance_ = cfg_.mse_threshold;
    return total / static_cast<double>(images.size());
  }

  double reconstruction_mse(const ImageTensor& img) const {
    const ImageTensor r = decode(encode(img));
    double s = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) s += (r[i] - img[i]) * (r[i] - img[i]);
    return s / static_cast<double>(img.size());
  }

 private:
  struct Caches {
    nn::Conv2d::Cache<float> e1, e2, d1, d2;
    nn::SiLU::Cache<float> ea, da;
  };

  static void check_even(std::size_t h, std::size_t w) {
    if (h == 0 || w == 0 || h % 2 || w % 2) throw InvalidInput("autoencoder: image dims must be even");
  }

  Tensor<float> encode_impl(const Tensor<float>& x, Caches* c) const {
    Tensor<float> h = e1_.forward(params_, x, c ? &c->e1 : nullptr);
    h = nn::SiLU{}.forward(h, c ? &c->ea : nullptr);
    h = nn::AvgPool2{}.forward(h);
    return e2_.forward(params_, h, c ? &c->e2 : nullptr);
  }

  Tensor<float> decode_impl(const Tensor<float>& z, Caches* c) const {
    Tensor<float> h = nn::Upsample2{}.forward(z);
    h = d1_.forward(params_, h, c ? &c->d1 : nullptr);
    h = nn::SiLU{}.forward(h, c ? &c->da : nullptr);
    return d2_.forward(params_, h, c ? &c->d2 : nullptr);
  }

  void backward(const Caches& c, const Tensor<float>& gy) {
    Tensor<float> g = d2_.backward(params_, c.d2, gy);
    g = nn::SiLU{}.backward(c.da, g);
    g = d1_.backward(params_, c.d1, g);
    g = nn::Upsample2{}.backward(g);
    g = e2_.backward(params_, c.e2, g);
    g = nn::AvgPool2{}.backward(g);
    g = nn::SiLU{}.backward(c.ea, g);
    e1_.backward(params_, c.e1, g);
  }

  AutoencoderConfig cfg_;
  nn::ParamLayout layout_;
  nn::Conv2d e1_, e2_, d1_, d2_;
  nn::ParamStore<float> params_;
  double tolerance_ = 0.0;
};

// Trains a tiny autoencoder and fails if it cannot reach the configured MSE.
inline std::shared_ptr<TinyAutoencoder> tiny_autoencoder_train(const std::vector<ImageTensor>& images,
                                                               const AutoencoderConfig& cfg = {}) {
  auto ae = std::make_shared<TinyAutoencoder>(cfg);
  const double mse = ae->fit(images);
  if (!(mse < cfg.mse_threshold))
    throw Diverged("autoencoder: reconstruction MSE " + std::to_string(mse) + " above threshold " +
                   std::to_string(cfg.mse_threshold));
  return ae;
}

}  // namespace vitreoforge
