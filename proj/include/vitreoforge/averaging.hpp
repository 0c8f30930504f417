#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <cstdint>
#include <limits>
#include <vector>

#include "vitreoforge/error.hpp"
#include "vitreoforge/image.hpp"

namespace vitreoforge {

struct ArtifactDetectConfig {
  double threshold = 0.0;
  // Closing uses a (2*kernel_half+1)^2 square.
  std::size_t kernel_half = 2;
  // A component counts as a motion strip when its column extent reaches this fraction of the width.
  double min_width_fraction = 0.5;
};

struct AveragingConfig {
  ArtifactDetectConfig detect;
  std::size_t expected_frames = 10;
};

inline ArtifactMask binary_threshold(const ImageTensor& img, double threshold = 0.0) {
  ArtifactMask m(img.height(), img.width());
  for (std::size_t i = 0; i < img.size(); ++i) m.set(i, img[i] <= threshold);
  return m;
}

namespace detail {

// Separable square max (dilate) or min (erode); out-of-image samples read as false.
inline ArtifactMask square_filter(const ArtifactMask& in, std::size_t half, bool dilate) {
  const auto h = static_cast<std::ptrdiff_t>(in.height());
  const auto w = static_cast<std::ptrdiff_t>(in.width());
  const auto k = static_cast<std::ptrdiff_t>(half);
  auto pass = [&](const ArtifactMask& src, bool horizontal) {
    ArtifactMask dst(in.height(), in.width());
    for (std::ptrdiff_t r = 0; r < h; ++r)
      for (std::ptrdiff_t c = 0; c < w; ++c) {
        bool acc = !dilate;
        for (std::ptrdiff_t d = -k; d <= k; ++d) {
          const bool v = horizontal ? src.at_or_false(r, c + d) : src.at_or_false(r + d, c);
          if (dilate ? v : !v) {
            acc = dilate;
            break;
          }
        }
        dst.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c), acc);
      }
    return dst;
  };
  return pass(pass(in, true), false);
}

}  // namespace detail

inline ArtifactMask morph_close(const ArtifactMask& mask, std::size_t kernel_half) {
  if (kernel_half == 0) return mask;
  return detail::square_filter(detail::square_filter(mask, kernel_half, true), kernel_half, false);
}

// Single pass: keep a pixel iff at least 3 of its 4 neighbours are set.
inline ArtifactMask neighbor_refine(const ArtifactMask& mask) {
  ArtifactMask out(mask.height(), mask.width());
  for (std::size_t r = 0; r < mask.height(); ++r)
    for (std::size_t c = 0; c < mask.width(); ++c) {
      if (!mask(r, c)) continue;
      const auto rr = static_cast<std::ptrdiff_t>(r), cc = static_cast<std::ptrdiff_t>(c);
      const int n = mask.at_or_false(rr - 1, cc) + mask.at_or_false(rr + 1, cc) + mask.at_or_false(rr, cc - 1) +
                    mask.at_or_false(rr, cc + 1);
      out.set(r, c, n >= 3);
    }
  return out;
}

// Keeps 4-connected components whose column extent is at least min_columns.
inline ArtifactMask keep_wide_components(const ArtifactMask& mask, std::size_t min_columns) {
  const std::size_t h = mask.height(), w = mask.width();
  ArtifactMask out(h, w);
  std::vector<std::uint8_t> seen(h * w, 0);
  std::vector<std::size_t> stack, component;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (!mask[start] || seen[start]) continue;
    component.clear();
    stack.assign(1, start);
    seen[start] = 1;
    std::size_t cmin = w, cmax = 0;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const std::size_t r = p / w, c = p % w;
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
      auto visit = [&](std::size_t q) {
        if (mask[q] && !seen[q]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      };
      if (r > 0) visit(p - w);
      if (r + 1 < h) visit(p + w);
      if (c > 0) visit(p - 1);
      if (c + 1 < w) visit(p + 1);
    }
    if (cmax - cmin + 1 >= min_columns)
      for (std::size_t p : component) out.set(p, true);
  }
  return out;
}

// threshold -> closing -> 3-of-4 refinement -> wide-strip filter.
inline ArtifactMask detect_artifact(const ImageTensor& img, const ArtifactDetectConfig& cfg = {}) {
  ArtifactMask m = binary_threshold(img, cfg.threshold);
  m = morph_close(m, cfg.kernel_half);
  m = neighbor_refine(m);
  const auto min_cols = static_cast<std::size_t>(std::ceil(cfg.min_width_fraction * static_cast<double>(img.width())));
  return keep_wide_components(m, std::max<std::size_t>(min_cols, 1));
}

struct WeightedAverage {
  ImageTensor image;
  // Number of frames that contributed to each pixel.
  Image<std::uint32_t> coverage;
};

namespace detail {

inline void check_frames(const std::vector<ImageTensor>& frames, const char* who) {
  if (frames.empty()) throw InvalidInput(std::string(who) + ": no frames");
  for (const auto& f : frames)
    if (!f.same_shape(frames.front())) throw InvalidInput(std::string(who) + ": frame shapes differ");
}

}  // namespace detail

inline ImageTensor arithmetic_average(const std::vector<ImageTensor>& frames) {
  detail::check_frames(frames, "arithmetic_average");
  ImageTensor out(frames.front().height(), frames.front().width());
  for (std::size_t p = 0; p < out.size(); ++p) {
    // Shifted by the first frame so that identical inputs average exactly.
    const double ref = frames.front()[p];
    double acc = 0.0;
    for (const auto& f : frames) acc += f[p] - ref;
    out[p] = ref + acc / static_cast<double>(frames.size());
  }
  return out;
}

// Masked pixels get weight 0; a pixel masked in every frame falls back to the plain mean.
inline WeightedAverage weighted_average(const std::vector<ImageTensor>& frames,
                                        const std::vector<ArtifactMask>& masks) {
  detail::check_frames(frames, "weighted_average");
  if (masks.size() != frames.size()) throw InvalidInput("weighted_average: frame/mask count mismatch");
  for (const auto& m : masks)
    if (!m.same_shape(frames.front())) throw InvalidInput("weighted_average: mask shape differs from frames");

  const std::size_t h = frames.front().height(), w = frames.front().width();
  WeightedAverage out{ImageTensor(h, w), Image<std::uint32_t>(h, w)};
  for (std::size_t p = 0; p < h * w; ++p) {
    const double ref_all = frames.front()[p];
    double ref = 0.0, sum = 0.0, all = 0.0;
    std::uint32_t n = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const double v = frames[i][p];
      all += v - ref_all;
      if (!masks[i][p]) {
        if (n == 0) ref = v;
        sum += v - ref;
        ++n;
      }
    }
    out.coverage[p] = n;
    out.image[p] = n > 0 ? ref + sum / n : ref_all + all / static_cast<double>(frames.size());
  }
  return out;
}

struct PseudoArt100 {
  ImageTensor image;
  Image<std::uint32_t> coverage;
  std::vector<ArtifactMask> masks;
};

inline PseudoArt100 pseudo_art100_detailed(const std::vector<ImageTensor>& frames, const AveragingConfig& cfg = {}) {
  if (frames.size() != cfg.expected_frames)
    throw InvalidInput("pseudo_art100: expected " + std::to_string(cfg.expected_frames) + " frames, got " +
                       std::to_string(frames.size()));
  detail::check_frames(frames, "pseudo_art100");
  std::vector<ArtifactMask> masks;
  masks.reserve(frames.size());
  for (const auto& f : frames) masks.push_back(detect_artifact(f, cfg.detect));
  auto avg = weighted_average(frames, masks);
  return {std::move(avg.image), std::move(avg.coverage), std::move(masks)};
}

inline ImageTensor pseudo_art100(const std::vector<ImageTensor>& frames, const AveragingConfig& cfg = {}) {
  return pseudo_art100_detailed(frames, cfg).image;
}

// Draws the mask outline (mask pixels with an unmasked 4-neighbour) in white.
inline ImageTensor contour_overlay(const ImageTensor& img, const ArtifactMask& mask) {
  if (!mask.same_shape(img)) throw InvalidInput("contour_overlay: shape mismatch");
  ImageTensor out = img;
  for (std::size_t r = 0; r < img.height(); ++r)
    for (std::size_t c = 0; c < img.width(); ++c) {
      if (!mask(r, c)) continue;
      const auto rr = static_cast<std::ptrdiff_t>(r), cc = static_cast<std::ptrdiff_t>(c);
      if (!mask.at_or_false(rr - 1, cc) || !mask.at_or_false(rr + 1, cc) || !mask.at_or_false(rr, cc - 1) ||
          !mask.at_or_false(rr, cc + 1))
        out(r, c) = 1.0;
    }
  return out;
}

}  // namespace vitreoforge
