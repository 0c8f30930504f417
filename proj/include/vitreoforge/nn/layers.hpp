#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "vitreoforge/error.hpp"
#include "vitreoforge/image.hpp"
#include "vitreoforge/nn/params.hpp"

// Building blocks with hand-written backward passes. Every layer is a
// stateless description (shapes + parameter slots); activations needed by
// backward live in a per-call Cache so one network can serve many threads.
namespace vitreoforge::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Square-kernel convolution, stride 1, zero "same" padding.
struct Conv2d {
  std::size_t in = 0, out = 0, kernel = 3;
  ParamSlot weight, bias;

  Conv2d() = default;
  Conv2d(ParamLayout& layout, std::size_t in_ch, std::size_t out_ch, std::size_t k)
      : in(in_ch), out(out_ch), kernel(k) {
    if (k % 2 == 0) throw InvalidInput("Conv2d: kernel size must be odd");
    weight = layout.add(out * in * k * k, in * k * k);
    bias = layout.add(out, in * k * k);
  }

  template <typename T>
  struct Cache {
    Tensor<T> input;
  };

  template <typename T>
  RowMat<T> im2col(const Tensor<T>& x) const {
    const std::size_t h = x.height(), w = x.width(), k = kernel;
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    RowMat<T> col(static_cast<Eigen::Index>(in * k * k), static_cast<Eigen::Index>(h * w));
    for (std::size_t c = 0; c < in; ++c)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          T* dst = col.data() + ((c * k + ky) * k + kx) * h * w;
          for (std::size_t y = 0; y < h; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
            for (std::size_t xx = 0; xx < w; ++xx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
              dst[y * w + xx] = (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(h) ||
                                 sx >= static_cast<std::ptrdiff_t>(w))
                                    ? T{0}
                                    : x(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
          }
        }
    return col;
  }

  template <typename T>
  void col2im(const RowMat<T>& col, Tensor<T>& gx) const {
    const std::size_t h = gx.height(), w = gx.width(), k = kernel;
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    for (std::size_t c = 0; c < in; ++c)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx) {
          const T* src = col.data() + ((c * k + ky) * k + kx) * h * w;
          for (std::size_t y = 0; y < h; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t xx = 0; xx < w; ++xx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              gx(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) += src[y * w + xx];
            }
          }
        }
  }

  template <typename T>
  Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, std::type_identity_t<Cache<T>>* cache = nullptr) const {
    if (x.channels() != in) throw InvalidInput("Conv2d: expected " + std::to_string(in) + " input channels");
    const auto hw = static_cast<Eigen::Index>(x.plane());
    const auto kk = static_cast<Eigen::Index>(in * kernel * kernel);
    Tensor<T> y(out, x.height(), x.width());
    ConstMatMap<T> W(p.w(weight), static_cast<Eigen::Index>(out), kk);
    MatMap<T> Y(y.data(), static_cast<Eigen::Index>(out), hw);
    if (kernel == 1) {
      Y.noalias() = W * ConstMatMap<T>(x.data(), kk, hw);
    } else {
      Y.noalias() = W * im2col(x);
    }
    const T* b = p.w(bias);
    for (std::size_t o = 0; o < out; ++o) Y.row(static_cast<Eigen::Index>(o)).array() += b[o];
    if (cache) cache->input = x;
    return y;
  }

  template <typename T>
  Tensor<T> backward(ParamStore<T>& p, const Cache<T>& cache, const Tensor<T>& gy) const {
    const Tensor<T>& x = cache.input;
    const auto hw = static_cast<Eigen::Index>(x.plane());
    const auto kk = static_cast<Eigen::Index>(in * kernel * kernel);
    ConstMatMap<T> W(p.w(weight), static_cast<Eigen::Index>(out), kk);
    MatMap<T> gW(p.g(weight), static_cast<Eigen::Index>(out), kk);
    ConstMatMap<T> GY(gy.data(), static_cast<Eigen::Index>(out), hw);
    T* gb = p.g(bias);
    for (std::size_t o = 0; o < out; ++o) gb[o] += GY.row(static_cast<Eigen::Index>(o)).sum();
    Tensor<T> gx(in, x.height(), x.width());
    if (kernel == 1) {
      gW.noalias() += GY * ConstMatMap<T>(x.data(), kk, hw).transpose();
      MatMap<T>(gx.data(), kk, hw).noalias() = W.transpose() * GY;
    } else {
      const RowMat<T> col = im2col(x);
      gW.noalias() += GY * col.transpose();
      const RowMat<T> gcol = W.transpose() * GY;
      col2im(gcol, gx);
    }
    return gx;
  }
};

struct Linear {
  std::size_t in = 0, out = 0;
  ParamSlot weight, bias;

  Linear() = default;
  Linear(ParamLayout& layout, std::size_t in_f, std::size_t out_f) : in(in_f), out(out_f) {
    weight = layout.add(out * in, in);
    bias = layout.add(out, in);
  }

  template <typename T>
  struct Cache {
    std::vector<T> input;
  };

  template <typename T>
  std::vector<T> forward(const ParamStore<T>& p, const std::vector<T>& x, std::type_identity_t<Cache<T>>* cache = nullptr) const {
    if (x.size() != in) throw InvalidInput("Linear: input size mismatch");
    std::vector<T> y(p.w(bias), p.w(bias) + out);
    const T* w = p.w(weight);
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t i = 0; i < in; ++i) y[o] += w[o * in + i] * x[i];
    if (cache) cache->input = x;
    return y;
  }

  template <typename T>
  std::vector<T> backward(ParamStore<T>& p, const Cache<T>& cache, const std::vector<T>& gy) const {
    const T* w = p.w(weight);
    T* gw = p.g(weight);
    T* gb = p.g(bias);
    std::vector<T> gx(in, T{0});
    for (std::size_t o = 0; o < out; ++o) {
      gb[o] += gy[o];
      for (std::size_t i = 0; i < in; ++i) {
        gw[o * in + i] += gy[o] * cache.input[i];
        gx[i] += w[o * in + i] * gy[o];
      }
    }
    return gx;
  }
};

// Largest divisor of channels not exceeding the requested group count.
inline std::size_t resolve_groups(std::size_t channels, std::size_t requested) {
  std::size_t g = std::max<std::size_t>(1, std::min(channels, requested));
  while (channels % g != 0) --g;
  return g;
}

struct GroupNorm {
  std::size_t channels = 0, groups = 1;
  double eps = 1e-5;
  ParamSlot gamma, beta;

  GroupNorm() = default;
  GroupNorm(ParamLayout& layout, std::size_t ch, std::size_t requested_groups)
      : channels(ch), groups(resolve_groups(ch, requested_groups)) {
    gamma = layout.add(ch, 1, InitRule::Ones);
    beta = layout.add(ch, 1, InitRule::Zeros);
  }

  template <typename T>
  struct Cache {
    Tensor<T> xhat;
    std::vector<T> inv_std;
  };

  template <typename T>
  Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, std::type_identity_t<Cache<T>>* cache = nullptr) const {
    if (x.channels() != channels) throw InvalidInput("GroupNorm: channel mismatch");
    const std::size_t per = channels / groups, plane = x.plane(), n = per * plane;
    Tensor<T> xhat(x.channels(), x.height(), x.width());
    std::vector<T> inv_std(groups);
    for (std::size_t g = 0; g < groups; ++g) {
      const T* src = x.data() + g * n;
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += src[i];
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
      var /= static_cast<double>(n);
      const T is = static_cast<T>(1.0 / std::sqrt(var + eps));
      inv_std[g] = is;
      T* dst = xhat.data() + g * n;
      for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] - static_cast<T>(mean)) * is;
    }
    Tensor<T> y(x.channels(), x.height(), x.width());
    const T* ga = p.w(gamma);
    const T* be = p.w(beta);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] = ga[c] * xhat[c * plane + i] + be[c];
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  template <typename T>
  Tensor<T> backward(ParamStore<T>& p, const Cache<T>& cache, const Tensor<T>& gy) const {
    const Tensor<T>& xhat = cache.xhat;
    const std::size_t per = channels / groups, plane = xhat.plane(), n = per * plane;
    const T* ga = p.w(gamma);
    T* gga = p.g(gamma);
    T* gbe = p.g(beta);
    Tensor<T> gx(xhat.channels(), xhat.height(), xhat.width());
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < plane; ++i) {
        gga[c] += gy[c * plane + i] * xhat[c * plane + i];
        gbe[c] += gy[c * plane + i];
      }
    for (std::size_t g = 0; g < groups; ++g) {
      double mean_g = 0.0, mean_gx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = g * n + i;
        const double gh = static_cast<double>(gy[idx]) * ga[idx / plane];
        mean_g += gh;
        mean_gx += gh * xhat[idx];
      }
      mean_g /= static_cast<double>(n);
      mean_gx /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = g * n + i;
        const double gh = static_cast<double>(gy[idx]) * ga[idx / plane];
        gx[idx] = static_cast<T>(cache.inv_std[g] * (gh - mean_g - xhat[idx] * mean_gx));
      }
    }
    return gx;
  }
};

template <typename T>
T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

// x * sigmoid(x)
struct SiLU {
  template <typename T>
  struct Cache {
    std::vector<T> input;
  };

  template <typename T>
  static void apply(std::span<const T> x, std::span<T> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
  }

  template <typename T>
  static void grad(std::span<const T> x, std::span<const T> gy, std::span<T> gx) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T s = sigmoid(x[i]);
      gx[i] = gy[i] * s * (T{1} + x[i] * (T{1} - s));
    }
  }

  template <typename T>
  Tensor<T> forward(const Tensor<T>& x, std::type_identity_t<Cache<T>>* cache = nullptr) const {
    Tensor<T> y(x.channels(), x.height(), x.width());
    apply<T>(x.values(), y.values());
    if (cache) cache->input.assign(x.values().begin(), x.values().end());
    return y;
  }

  template <typename T>
  Tensor<T> backward(const Cache<T>& cache, const Tensor<T>& gy) const {
    Tensor<T> gx(gy.channels(), gy.height(), gy.width());
    grad<T>(cache.input, gy.values(), gx.values());
    return gx;
  }

  template <typename T>
  std::vector<T> forward(const std::vector<T>& x, std::type_identity_t<Cache<T>>* cache = nullptr) const {
    std::vector<T> y(x.size());
    apply<T>(x, y);
    if (cache) cache->input = x;
    return y;
  }

  template <typename T>
  std::vector<T> backward(const Cache<T>& cache, const std::vector<T>& gy) const {
    std::vector<T> gx(gy.size());
    grad<T>(cache.input, gy, gx);
    return gx;
  }
};

// Inverted dropout; the kept-mask (already scaled) is cached for backward.
struct Dropout {
  template <typename T>
  struct Cache {
    std::vector<T> scale;
  };

  template <typename T>
  Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx, std::type_identity_t<Cache<T>>* cache = nullptr) const {
    if (!ctx.training || ctx.dropout <= 0.0 || ctx.rng == nullptr) {
      if (cache) cache->scale.clear();
      return x;
    }
    std::bernoulli_distribution keep(1.0 - ctx.dropout);
    const T s = static_cast<T>(1.0 / (1.0 - ctx.dropout));
    Tensor<T> y = x;
    std::vector<T> scale(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      scale[i] = keep(*ctx.rng) ? s : T{0};
      y[i] *= scale[i];
    }
    if (cache) cache->scale = std::move(scale);
    return y;
  }

  template <typename T>
  Tensor<T> backward(const Cache<T>& cache, const Tensor<T>& gy) const {
    if (cache.scale.empty()) return gy;
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= cache.scale[i];
    return gx;
  }
};

// 2x2 average pooling; spatial dims must be even.
struct AvgPool2 {
  template <typename T>
  Tensor<T> forward(const Tensor<T>& x) const {
    if (x.height() % 2 || x.width() % 2) throw InvalidInput("AvgPool2: spatial size must be even");
    Tensor<T> y(x.channels(), x.height() / 2, x.width() / 2);
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t r = 0; r < y.height(); ++r)
        for (std::size_t q = 0; q < y.width(); ++q)
          y(c, r, q) = T(0.25) * (x(c, 2 * r, 2 * q) + x(c, 2 * r, 2 * q + 1) + x(c, 2 * r + 1, 2 * q) +
                                  x(c, 2 * r + 1, 2 * q + 1));
    return y;
  }

  template <typename T>
  Tensor<T> backward(const Tensor<T>& gy) const {
    Tensor<T> gx(gy.channels(), gy.height() * 2, gy.width() * 2);
    for (std::size_t c = 0; c < gy.channels(); ++c)
      for (std::size_t r = 0; r < gx.height(); ++r)
        for (std::size_t q = 0; q < gx.width(); ++q) gx(c, r, q) = T(0.25) * gy(c, r / 2, q / 2);
    return gx;
  }
};

// Nearest-neighbour 2x upsampling.
struct Upsample2 {
  template <typename T>
  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> y(x.channels(), x.height() * 2, x.width() * 2);
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t r = 0; r < y.height(); ++r)
        for (std::size_t q = 0; q < y.width(); ++q) y(c, r, q) = x(c, r / 2, q / 2);
    return y;
  }

  template <typename T>
  Tensor<T> backward(const Tensor<T>& gy) const {
    Tensor<T> gx(gy.channels(), gy.height() / 2, gy.width() / 2);
    for (std::size_t c = 0; c < gy.channels(); ++c)
      for (std::size_t r = 0; r < gy.height(); ++r)
        for (std::size_t q = 0; q < gy.width(); ++q) gx(c, r / 2, q / 2) += gy(c, r, q);
    return gx;
  }
};

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw InvalidInput("concat_channels: spatial mismatch");
  Tensor<T> y(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), y.values().begin());
  std::copy(b.values().begin(), b.values().end(), y.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& y, std::size_t first) {
  Tensor<T> a(first, y.height(), y.width()), b(y.channels() - first, y.height(), y.width());
  std::copy(y.values().begin(), y.values().begin() + static_cast<std::ptrdiff_t>(a.size()), a.values().begin());
  std::copy(y.values().begin() + static_cast<std::ptrdiff_t>(a.size()), y.values().end(), b.values().begin());
  return {std::move(a), std::move(b)};
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Transformer-style sinusoidal features of a scalar timestep.
template <typename T>
std::vector<T> sinusoidal_embedding(double t, std::size_t dim) {
  std::vector<T> e(dim, T{0});
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    e[i] = static_cast<T>(std::sin(t * freq));
    e[half + i] = static_cast<T>(std::cos(t * freq));
  }
  return e;
}

}  // namespace vitreoforge::nn
