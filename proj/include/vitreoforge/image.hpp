#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vitreoforge/aligned.hpp"
#include "vitreoforge/error.hpp"

namespace vitreoforge {

// Row-major H x W grayscale raster, origin top-left.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(std::size_t height, std::size_t width, T fill = T{0})
      : height_(height), width_(width), pixels_(height * width, fill) {}
  Image(std::size_t height, std::size_t width, std::vector<T> pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (pixels_.size() != height_ * width_)
      throw InvalidInput("image: pixel count " + std::to_string(pixels_.size()) + " != " +
                         std::to_string(height_) + "x" + std::to_string(width_));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  T& operator()(std::size_t row, std::size_t col) noexcept { return pixels_[row * width_ + col]; }
  const T& operator()(std::size_t row, std::size_t col) const noexcept {
    return pixels_[row * width_ + col];
  }
  T& operator[](std::size_t i) noexcept { return pixels_[i]; }
  const T& operator[](std::size_t i) const noexcept { return pixels_[i]; }

  std::span<T> values() noexcept { return pixels_; }
  std::span<const T> values() const noexcept { return pixels_; }
  const std::vector<T>& pixels() const noexcept { return pixels_; }

  template <typename U>
  bool same_shape(const Image<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  template <typename U>
  Image<U> cast() const {
    std::vector<U> out(pixels_.size());
    std::transform(pixels_.begin(), pixels_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Image<U>(height_, width_, std::move(out));
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> pixels_;
};

using ImageTensor = Image<double>;

// Channel-major C x H x W stack. Used for network inputs, latents and activations.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t channels, std::size_t height, std::size_t width, T fill = T{0})
      : c_(channels), h_(height), w_(width), data_(channels * height * width, fill) {}
  Tensor(std::size_t channels, std::size_t height, std::size_t width, AlignedVector<T> data)
      : c_(channels), h_(height), w_(width), data_(std::move(data)) {
    if (data_.size() != c_ * h_ * w_) throw InvalidInput("tensor: element count mismatch");
  }
  Tensor(std::size_t channels, std::size_t height, std::size_t width, const std::vector<T>& data)
      : Tensor(channels, height, width, AlignedVector<T>(data.begin(), data.end())) {}

  std::size_t channels() const noexcept { return c_; }
  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t plane() const noexcept { return h_ * w_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t ch, std::size_t row, std::size_t col) noexcept {
    return data_[(ch * h_ + row) * w_ + col];
  }
  const T& operator()(std::size_t ch, std::size_t row, std::size_t col) const noexcept {
    return data_[(ch * h_ + row) * w_ + col];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::span<T> channel(std::size_t ch) noexcept { return {data_.data() + ch * plane(), plane()}; }
  std::span<const T> channel(std::size_t ch) const noexcept {
    return {data_.data() + ch * plane(), plane()};
  }

  template <typename U>
  bool same_shape(const Tensor<U>& o) const noexcept {
    return c_ == o.channels() && h_ == o.height() && w_ == o.width();
  }

  template <typename U>
  Tensor<U> cast() const {
    AlignedVector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(c_, h_, w_, std::move(out));
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t c_ = 0, h_ = 0, w_ = 0;
  AlignedVector<T> data_;
};

// Anything with a flat value span and a shape comparison: images, latents.
template <typename F>
concept Field = requires(F f, const F cf) {
  typename F::value_type;
  { f.values() } -> std::convertible_to<std::span<typename F::value_type>>;
  { cf.same_shape(cf) } -> std::convertible_to<bool>;
};

template <typename T>
Tensor<T> to_tensor(const Image<T>& img) {
  return Tensor<T>(1, img.height(), img.width(), img.pixels());
}

template <typename T>
Image<T> to_image(const Tensor<T>& t) {
  if (t.channels() != 1) throw InvalidInput("to_image: tensor has " + std::to_string(t.channels()) + " channels");
  return Image<T>(t.height(), t.width(), std::vector<T>(t.values().begin(), t.values().end()));
}

// Stacks single-channel images into one tensor (channel-wise concatenation).
template <typename T>
Tensor<T> stack_channels(std::initializer_list<const Image<T>*> planes) {
  const Image<T>& first = **planes.begin();
  Tensor<T> out(planes.size(), first.height(), first.width());
  std::size_t ch = 0;
  for (const Image<T>* p : planes) {
    if (!p->same_shape(first)) throw InvalidInput("stack_channels: shape mismatch");
    std::copy(p->values().begin(), p->values().end(), out.channel(ch++).begin());
  }
  return out;
}

// Per-pixel boolean mask. The tag distinguishes artefact masks from ROI masks.
template <typename Tag>
class BasicMask {
 public:
  BasicMask() = default;
  BasicMask(std::size_t height, std::size_t width, bool fill = false)
      : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}
  BasicMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
      : height_(height), width_(width), bits_(std::move(bits)) {
    if (bits_.size() != height_ * width_) throw InvalidInput("mask: bit count mismatch");
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool operator()(std::size_t row, std::size_t col) const noexcept { return bits_[row * width_ + col] != 0; }
  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  void set(std::size_t row, std::size_t col, bool v) noexcept { bits_[row * width_ + col] = v ? 1 : 0; }
  void set(std::size_t i, bool v) noexcept { bits_[i] = v ? 1 : 0; }

  // Out-of-image coordinates read as false.
  bool at_or_false(std::ptrdiff_t row, std::ptrdiff_t col) const noexcept {
    if (row < 0 || col < 0 || row >= static_cast<std::ptrdiff_t>(height_) ||
        col >= static_cast<std::ptrdiff_t>(width_))
      return false;
    return (*this)(static_cast<std::size_t>(row), static_cast<std::size_t>(col));
  }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  template <typename U>
  bool same_shape(const U& o) const noexcept {
    return height_ == o.height() && width_ == o.width();
  }

  // 0.0 / 1.0 float image, the on-disk representation of masks.
  ImageTensor to_image() const {
    ImageTensor out(height_, width_);
    for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = bits_[i] ? 1.0 : 0.0;
    return out;
  }

  static BasicMask from_image(const ImageTensor& img, double threshold = 0.5) {
    BasicMask m(img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i) m.set(i, img[i] >= threshold);
    return m;
  }

  bool operator==(const BasicMask&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct ArtifactTag {};
struct RoiTag {};
using ArtifactMask = BasicMask<ArtifactTag>;
using RoiMask = BasicMask<RoiTag>;

// Signed generated-minus-ground-truth intensities in [-1, 1].
class DifferenceMap {
 public:
  explicit DifferenceMap(ImageTensor values) : values_(std::move(values)) {}
  std::size_t height() const noexcept { return values_.height(); }
  std::size_t width() const noexcept { return values_.width(); }
  const ImageTensor& values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  // Maps [-1, 1] to [0, 1] for raster export (0.5 = no difference).
  ImageTensor to_display() const {
    ImageTensor out(height(), width());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (values_[i] + 1.0);
    return out;
  }

 private:
  ImageTensor values_;
};

template <typename T>
bool all_finite(const Image<T>& img) {
  return std::all_of(img.values().begin(), img.values().end(),
                     [](T v) { return std::isfinite(static_cast<double>(v)); });
}

template <typename T>
bool is_normalized(const Image<T>& img) {
  return std::all_of(img.values().begin(), img.values().end(),
                     [](T v) { return v >= T{0} && v <= T{1}; });
}

// Per-image (v - min) / (max - min). A constant image maps to all zeros.
template <typename T>
Image<T> minmax_normalize(const Image<T>& img) {
  if (!all_finite(img)) throw InvalidInput("minmax_normalize: non-finite pixel");
  Image<T> out(img.height(), img.width());
  if (img.empty()) return out;
  const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
  const T mn = *lo, mx = *hi;
  if (!(mx > mn)) return out;
  const T range = mx - mn;
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = (img[i] - mn) / range;
  return out;
}

// Adds rows_each_side zero rows above and below.
template <typename T>
Image<T> pad_vertical(const Image<T>& img, std::size_t rows_each_side) {
  Image<T> out(img.height() + 2 * rows_each_side, img.width());
  std::copy(img.values().begin(), img.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(rows_each_side * img.width()));
  return out;
}

template <typename T>
Image<T> crop_vertical(const Image<T>& img, std::size_t rows_each_side) {
  if (img.height() <= 2 * rows_each_side)
    throw InvalidInput("crop_vertical: height " + std::to_string(img.height()) +
                       " too small to remove " + std::to_string(rows_each_side) + " rows per side");
  const std::size_t h = img.height() - 2 * rows_each_side;
  const auto first = img.values().begin() + static_cast<std::ptrdiff_t>(rows_each_side * img.width());
  return Image<T>(h, img.width(), std::vector<T>(first, first + static_cast<std::ptrdiff_t>(h * img.width())));
}

template <typename T>
DifferenceMap difference_map(const Image<T>& generated, const Image<T>& ground_truth) {
  if (!generated.same_shape(ground_truth)) throw InvalidInput("difference_map: shape mismatch");
  ImageTensor out(generated.height(), generated.width());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<double>(generated[i]) - static_cast<double>(ground_truth[i]);
  return DifferenceMap(std::move(out));
}

template <typename T>
Image<T> clamp_unit(Image<T> img) {
  for (auto& v : img.values()) v = std::clamp(v, T{0}, T{1});
  return img;
}

}  // namespace vitreoforge
