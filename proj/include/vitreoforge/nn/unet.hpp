#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vitreoforge/nn/blocks.hpp"

namespace vitreoforge::nn {

// Encoder-decoder shape. Multipliers may be fractional; each level gets
// max(1, round(base * multiplier)) channels.
struct Architecture {
  std::size_t in_channels = 2;
  std::size_t out_channels = 1;
  std::size_t base_channels = 16;
  std::vector<double> channel_mult = {1.0, 2.0};
  std::size_t res_blocks = 2;
  std::vector<bool> attention = {false, false};
  std::size_t attention_heads = 1;
  std::size_t norm_groups = 8;
  bool time_embedding = true;

  std::size_t levels() const noexcept { return channel_mult.size(); }

  std::size_t level_channels(std::size_t level) const {
    const double c = std::round(static_cast<double>(base_channels) * channel_mult.at(level));
    return c < 1.0 ? 1 : static_cast<std::size_t>(c);
  }

  // Spatial dims must survive levels()-1 halvings.
  std::size_t spatial_divisor() const noexcept { return std::size_t{1} << (levels() - 1); }

  void validate() const {
    using detail::require;
    require(in_channels > 0 && out_channels > 0 && base_channels > 0, "architecture: zero channel count");
    require(!channel_mult.empty(), "architecture: no levels");
    for (double m : channel_mult) require(m > 0.0 && std::isfinite(m), "architecture: multipliers must be positive");
    require(attention.size() == channel_mult.size(), "architecture: one attention flag per level");
    require(res_blocks >= 1, "architecture: need at least one residual block per level");
    require(attention_heads >= 1, "architecture: attention heads must be >= 1");
    require(norm_groups >= 1, "architecture: norm groups must be >= 1");
  }

  bool operator==(const Architecture&) const = default;
};

// Conditional encoder-decoder with skip connections. Input is a channel stack
// (noisy sample + conditioning image for diffusion), output has out_channels planes
// at the input resolution.
class UNet {
 public:
  UNet() = default;
  explicit UNet(const Architecture& arch) : arch_(arch) {
    arch_.validate();
    ParamLayout& L = layout_;
    const std::size_t G = arch_.norm_groups;
    std::size_t tdim = 0;
    if (arch_.time_embedding) {
      temb_ = TimeEmbedding(L, arch_.base_channels);
      tdim = temb_.dim;
    }
    conv_in_ = Conv2d(L, arch_.in_channels, arch_.level_channels(0), 3);
    std::size_t ch = arch_.level_channels(0);
    const std::size_t nl = arch_.levels();
    enc_.resize(nl);
    for (std::size_t l = 0; l < nl; ++l) {
      const std::size_t lc = arch_.level_channels(l);
      for (std::size_t b = 0; b < arch_.res_blocks; ++b) {
        Stage s;
        s.res = ResBlock(L, ch, lc, G, tdim);
        if (arch_.attention[l]) s.attn = Attention(L, lc, G, arch_.attention_heads);
        enc_[l].push_back(std::move(s));
        ch = lc;
      }
    }
    dec_.resize(nl);
    for (std::size_t l = nl - 1; l-- > 0;) {
      const std::size_t lc = arch_.level_channels(l);
      ch += lc;  // skip concatenation
      for (std::size_t b = 0; b < arch_.res_blocks; ++b) {
        Stage s;
        s.res = ResBlock(L, ch, lc, G, tdim);
        if (arch_.attention[l]) s.attn = Attention(L, lc, G, arch_.attention_heads);
        dec_[l].push_back(std::move(s));
        ch = lc;
      }
    }
    norm_out_ = GroupNorm(L, ch, G);
    conv_out_ = Conv2d(L, ch, arch_.out_channels, 3);
  }

  const Architecture& architecture() const noexcept { return arch_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  std::size_t parameter_count() const noexcept { return layout_.total(); }

  template <typename T>
  struct StageCache {
    ResBlock::Cache<T> res;
    Attention::Cache<T> attn;
  };

  template <typename T>
  struct Cache {
    TimeEmbedding::Cache<T> temb;
    SiLU::Cache<T> temb_act;
    Conv2d::Cache<T> conv_in;
    std::vector<std::vector<StageCache<T>>> enc, dec;
    std::vector<std::size_t> up_channels;  // channels of the upsampled branch per decoder level
    GroupNorm::Cache<T> norm_out;
    SiLU::Cache<T> act_out;
    Conv2d::Cache<T> conv_out;
  };

  template <typename T>
  Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, std::optional<double> t, const RunContext& ctx,
                    std::type_identity_t<Cache<T>>* c = nullptr) const {
    check_input(x, t);
    const std::size_t nl = arch_.levels();
    std::vector<T> temb_act;
    if (arch_.time_embedding) {
      auto e = temb_.forward(p, *t, c ? &c->temb : nullptr);
      temb_act = SiLU{}.forward(e, c ? &c->temb_act : nullptr);
    }
    const std::vector<T>* ta = arch_.time_embedding ? &temb_act : nullptr;
    if (c) {
      c->enc.assign(nl, {});
      c->dec.assign(nl, {});
      c->up_channels.assign(nl, 0);
    }

    Tensor<T> h = conv_in_.forward(p, x, c ? &c->conv_in : nullptr);
    std::vector<Tensor<T>> skips(nl);
    for (std::size_t l = 0; l < nl; ++l) {
      if (c) c->enc[l].resize(enc_[l].size());
      for (std::size_t b = 0; b < enc_[l].size(); ++b)
        h = run_stage(p, enc_[l][b], h, ta, ctx, c ? &c->enc[l][b] : nullptr);
      if (l + 1 < nl) {
        skips[l] = h;
        h = AvgPool2{}.forward(h);
      }
    }
    for (std::size_t l = nl - 1; l-- > 0;) {
      h = Upsample2{}.forward(h);
      if (c) c->up_channels[l] = h.channels();
      h = concat_channels(h, skips[l]);
      if (c) c->dec[l].resize(dec_[l].size());
      for (std::size_t b = 0; b < dec_[l].size(); ++b)
        h = run_stage(p, dec_[l][b], h, ta, ctx, c ? &c->dec[l][b] : nullptr);
    }
    h = norm_out_.forward(p, h, c ? &c->norm_out : nullptr);
    h = SiLU{}.forward(h, c ? &c->act_out : nullptr);
    return conv_out_.forward(p, h, c ? &c->conv_out : nullptr);
  }

  // Accumulates parameter gradients; returns the input gradient.
  template <typename T>
  Tensor<T> backward(ParamStore<T>& p, const Cache<T>& c, const Tensor<T>& gy) const {
    const std::size_t nl = arch_.levels();
    std::vector<T> gta;
    if (arch_.time_embedding) gta.assign(temb_.dim, T{0});
    std::vector<T>* gtp = arch_.time_embedding ? &gta : nullptr;

    Tensor<T> g = conv_out_.backward(p, c.conv_out, gy);
    g = SiLU{}.backward(c.act_out, g);
    g = norm_out_.backward(p, c.norm_out, g);

    std::vector<Tensor<T>> gskips(nl);
    for (std::size_t l = 0; l + 1 < nl; ++l) {
      for (std::size_t b = dec_[l].size(); b-- > 0;) g = back_stage(p, dec_[l][b], c.dec[l][b], g, gtp);
      auto [gup, gskip] = split_channels(g, c.up_channels[l]);
      gskips[l] = std::move(gskip);
      g = Upsample2{}.backward(gup);
    }
    for (std::size_t l = nl; l-- > 0;) {
      if (l + 1 < nl) {
        g = AvgPool2{}.backward(g);
        add_into(g, gskips[l]);
      }
      for (std::size_t b = enc_[l].size(); b-- > 0;) g = back_stage(p, enc_[l][b], c.enc[l][b], g, gtp);
    }
    Tensor<T> gx = conv_in_.backward(p, c.conv_in, g);
    if (arch_.time_embedding) {
      const auto ge = SiLU{}.backward(c.temb_act, gta);
      temb_.backward(p, c.temb, ge);
    }
    return gx;
  }

 private:
  struct Stage {
    ResBlock res;
    std::optional<Attention> attn;
  };

  template <typename T>
  void check_input(const Tensor<T>& x, std::optional<double> t) const {
    if (x.channels() != arch_.in_channels)
      throw InvalidInput("UNet: expected " + std::to_string(arch_.in_channels) + " input channels, got " +
                         std::to_string(x.channels()));
    const std::size_t d = arch_.spatial_divisor();
    if (x.height() == 0 || x.width() == 0 || x.height() % d || x.width() % d)
      throw InvalidInput("UNet: spatial size must be a positive multiple of " + std::to_string(d));
    if (arch_.time_embedding != t.has_value())
      throw InvalidInput(arch_.time_embedding ? "UNet: timestep required" : "UNet: model takes no timestep");
  }

  template <typename T>
  Tensor<T> run_stage(const ParamStore<T>& p, const Stage& s, const Tensor<T>& x, const std::vector<T>* ta,
                      const RunContext& ctx, StageCache<T>* c) const {
    Tensor<T> h = s.res.forward(p, x, ta, ctx, c ? &c->res : nullptr);
    if (s.attn) h = s.attn->forward(p, h, c ? &c->attn : nullptr);
    return h;
  }

  template <typename T>
  Tensor<T> back_stage(ParamStore<T>& p, const Stage& s, const StageCache<T>& c, const Tensor<T>& g,
                       std::vector<T>* gta) const {
    Tensor<T> gh = s.attn ? s.attn->backward(p, c.attn, g) : g;
    return s.res.backward(p, c.res, gh, gta);
  }

  Architecture arch_;
  ParamLayout layout_;
  TimeEmbedding temb_;
  Conv2d conv_in_;
  std::vector<std::vector<Stage>> enc_, dec_;
  GroupNorm norm_out_;
  Conv2d conv_out_;
};

}  // namespace vitreoforge::nn
