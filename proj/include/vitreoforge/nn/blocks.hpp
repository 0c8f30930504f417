#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "vitreoforge/nn/layers.hpp"

namespace vitreoforge::nn {

// sinusoid(t) -> Linear -> SiLU -> Linear
struct TimeEmbedding {
  std::size_t sin_dim = 0, dim = 0;
  Linear fc1, fc2;

  TimeEmbedding() = default;
  TimeEmbedding(ParamLayout& layout, std::size_t base_channels)
      : sin_dim(base_channels), dim(4 * base_channels) {
    fc1 = Linear(layout, sin_dim, dim);
    fc2 = Linear(layout, dim, dim);
  }

  template <typename T>
  struct Cache {
    Linear::Cache<T> l1, l2;
    SiLU::Cache<T> act;
  };

  template <typename T>
  std::vector<T> forward(const ParamStore<T>& p, double t, std::type_identity_t<Cache<T>>* c = nullptr) const {
    auto e = sinusoidal_embedding<T>(t, sin_dim);
    auto h = fc1.forward(p, e, c ? &c->l1 : nullptr);
    h = SiLU{}.forward(h, c ? &c->act : nullptr);
    return fc2.forward(p, h, c ? &c->l2 : nullptr);
  }

  template <typename T>
  void backward(ParamStore<T>& p, const Cache<T>& c, const std::vector<T>& g) const {
    auto gh = fc2.backward(p, c.l2, g);
    gh = SiLU{}.backward(c.act, gh);
    fc1.backward(p, c.l1, gh);
  }
};

// GN -> SiLU -> conv -> (+ time projection) -> GN -> SiLU -> dropout -> conv, plus skip.
struct ResBlock {
  std::size_t in = 0, out = 0;
  bool has_time = false;
  GroupNorm norm1, norm2;
  Conv2d conv1, conv2;
  Linear time_proj;
  std::optional<Conv2d> skip;

  ResBlock() = default;
  ResBlock(ParamLayout& layout, std::size_t in_ch, std::size_t out_ch, std::size_t groups,
           std::size_t time_dim)
      : in(in_ch), out(out_ch), has_time(time_dim > 0) {
    norm1 = GroupNorm(layout, in, groups);
    conv1 = Conv2d(layout, in, out, 3);
    if (has_time) time_proj = Linear(layout, time_dim, out);
    norm2 = GroupNorm(layout, out, groups);
    conv2 = Conv2d(layout, out, out, 3);
    if (in != out) skip = Conv2d(layout, in, out, 1);
  }

  template <typename T>
  struct Cache {
    GroupNorm::Cache<T> n1, n2;
    SiLU::Cache<T> a1, a2;
    Conv2d::Cache<T> c1, c2, sk;
    Linear::Cache<T> tp;
    Dropout::Cache<T> drop;
  };

  // temb_act is SiLU(time embedding), shared by every block of the network.
  template <typename T>
  Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, const std::vector<T>* temb_act,
                    const RunContext& ctx, std::type_identity_t<Cache<T>>* c = nullptr) const {
    Tensor<T> h = norm1.forward(p, x, c ? &c->n1 : nullptr);
    h = SiLU{}.forward(h, c ? &c->a1 : nullptr);
    h = conv1.forward(p, h, c ? &c->c1 : nullptr);
    if (has_time) {
      if (temb_act == nullptr) throw InvalidInput("ResBlock: timestep embedding required");
      const auto shift = time_proj.forward(p, *temb_act, c ? &c->tp : nullptr);
      for (std::size_t ch = 0; ch < out; ++ch)
        for (T& v : h.channel(ch)) v += shift[ch];
    }
    h = norm2.forward(p, h, c ? &c->n2 : nullptr);
    h = SiLU{}.forward(h, c ? &c->a2 : nullptr);
    h = Dropout{}.forward(h, ctx, c ? &c->drop : nullptr);
    h = conv2.forward(p, h, c ? &c->c2 : nullptr);
    if (skip) {
      add_into(h, skip->forward(p, x, c ? &c->sk : nullptr));
    } else {
      add_into(h, x);
    }
    return h;
  }

  // Returns the input gradient; accumulates into gtemb_act when the block is time-conditioned.
  template <typename T>
  Tensor<T> backward(ParamStore<T>& p, const Cache<T>& c, const Tensor<T>& gy, std::vector<T>* gtemb_act) const {
    Tensor<T> g = conv2.backward(p, c.c2, gy);
    g = Dropout{}.backward(c.drop, g);
    g = SiLU{}.backward(c.a2, g);
    g = norm2.backward(p, c.n2, g);
    if (has_time) {
      std::vector<T> gshift(out, T{0});
      for (std::size_t ch = 0; ch < out; ++ch)
        for (T v : g.channel(ch)) gshift[ch] += v;
      const auto ge = time_proj.backward(p, c.tp, gshift);
      for (std::size_t i = 0; i < ge.size(); ++i) (*gtemb_act)[i] += ge[i];
    }
    g = conv1.backward(p, c.c1, g);
    g = SiLU{}.backward(c.a1, g);
    Tensor<T> gx = norm1.backward(p, c.n1, g);
    if (skip) {
      add_into(gx, skip->backward(p, c.sk, gy));
    } else {
      add_into(gx, gy);
    }
    return gx;
  }
};

// Multi-head spatial self-attention with a residual connection.
struct Attention {
  std::size_t channels = 0, heads = 1;
  GroupNorm norm;
  Conv2d qkv, proj;

  Attention() = default;
  Attention(ParamLayout& layout, std::size_t ch, std::size_t groups, std::size_t n_heads)
      : channels(ch), heads(n_heads) {
    if (n_heads == 0 || ch % n_heads != 0) throw InvalidInput("Attention: channels must divide into heads");
    norm = GroupNorm(layout, ch, groups);
    qkv = Conv2d(layout, ch, 3 * ch, 1);
    proj = Conv2d(layout, ch, ch, 1);
  }

  template <typename T>
  struct Cache {
    GroupNorm::Cache<T> n;
    Conv2d::Cache<T> q, o;
    Tensor<T> qkv_out;
    std::vector<RowMat<T>> probs;  // per head, N x N
  };

  template <typename T>
  Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, std::type_identity_t<Cache<T>>* c = nullptr) const {
    const auto n = static_cast<Eigen::Index>(x.plane());
    const auto d = static_cast<Eigen::Index>(channels / heads);
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    Tensor<T> h = norm.forward(p, x, c ? &c->n : nullptr);
    Tensor<T> t = qkv.forward(p, h, c ? &c->q : nullptr);
    Tensor<T> attn(channels, x.height(), x.width());
    if (c) c->probs.assign(heads, RowMat<T>());
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const auto off = static_cast<Eigen::Index>(hd) * d;
      ConstMatMap<T> Q(t.data() + off * n, d, n);
      ConstMatMap<T> K(t.data() + (static_cast<Eigen::Index>(channels) + off) * n, d, n);
      ConstMatMap<T> V(t.data() + (2 * static_cast<Eigen::Index>(channels) + off) * n, d, n);
      RowMat<T> S = (Q.transpose() * K) * scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        auto row = S.row(i);
        const T mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      MatMap<T>(attn.data() + off * n, d, n).noalias() = V * S.transpose();
      if (c) c->probs[hd] = std::move(S);
    }
    Tensor<T> y = proj.forward(p, attn, c ? &c->o : nullptr);
    add_into(y, x);
    if (c) c->qkv_out = std::move(t);
    return y;
  }

  template <typename T>
  Tensor<T> backward(ParamStore<T>& p, const Cache<T>& c, const Tensor<T>& gy) const {
    const auto n = static_cast<Eigen::Index>(gy.plane());
    const auto d = static_cast<Eigen::Index>(channels / heads);
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
    const Tensor<T> gattn = proj.backward(p, c.o, gy);
    Tensor<T> gt(3 * channels, gy.height(), gy.width());
    const Tensor<T>& t = c.qkv_out;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const auto off = static_cast<Eigen::Index>(hd) * d;
      const auto ko = static_cast<Eigen::Index>(channels) + off;
      const auto vo = 2 * static_cast<Eigen::Index>(channels) + off;
      ConstMatMap<T> Q(t.data() + off * n, d, n);
      ConstMatMap<T> K(t.data() + ko * n, d, n);
      ConstMatMap<T> V(t.data() + vo * n, d, n);
      const RowMat<T>& P = c.probs[hd];
      ConstMatMap<T> GO(gattn.data() + off * n, d, n);
      MatMap<T>(gt.data() + vo * n, d, n).noalias() = GO * P;
      RowMat<T> GP = GO.transpose() * V;
      // softmax backward, row-wise
      for (Eigen::Index i = 0; i < n; ++i) {
        const T dot = GP.row(i).dot(P.row(i));
        GP.row(i) = (P.row(i).array() * (GP.row(i).array() - dot)).matrix();
      }
      GP *= scale;
      MatMap<T>(gt.data() + off * n, d, n).noalias() = K * GP.transpose();
      MatMap<T>(gt.data() + ko * n, d, n).noalias() = Q * GP;
    }
    Tensor<T> gh = qkv.backward(p, c.q, gt);
    Tensor<T> gx = norm.backward(p, c.n, gh);
    add_into(gx, gy);
    return gx;
  }
};

}  // namespace vitreoforge::nn
