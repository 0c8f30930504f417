#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "vitreoforge/error.hpp"
#include "vitreoforge/image.hpp"
#include "vitreoforge/rng.hpp"

namespace vitreoforge {

// Half-open row interval [begin, end).
struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const RowRange&) const = default;
};

struct ArtifactStrip {
  RowRange rows;
  std::size_t frame_index = 0;
  bool operator==(const ArtifactStrip&) const = default;
};

// Synthetic layered B-scan description. Layer k spans the rows between boundary
// k-1 and boundary k, so there is one more reflectivity than boundaries.
struct PhantomSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::vector<std::size_t> layer_boundaries = {16, 28, 36, 44, 52};
  std::vector<double> layer_reflectivities = {0.05, 0.15, 0.45, 0.25, 0.5, 0.2};
  double boundary_jitter = 2.0;
  double speckle_looks = 1.0;
  // Number of ART1 realizations averaged into each frame (1 = ART1, 10 = ART10).
  std::size_t frames_per_average = 1;
  std::vector<ArtifactStrip> artifact_strips;
  std::uint64_t seed = 0;
};

inline void validate(const PhantomSpec& s) {
  using detail::require;
  require(s.height > 0 && s.width > 0, "phantom: empty image size");
  require(s.layer_reflectivities.size() == s.layer_boundaries.size() + 1,
          "phantom: need exactly one more reflectivity than boundaries");
  for (std::size_t i = 0; i < s.layer_boundaries.size(); ++i) {
    require(s.layer_boundaries[i] < s.height, "phantom: boundary outside image");
    require(i == 0 || s.layer_boundaries[i] > s.layer_boundaries[i - 1],
            "phantom: boundaries must be strictly increasing");
  }
  for (double r : s.layer_reflectivities) require(r >= 0.0 && r <= 1.0, "phantom: reflectivity outside [0,1]");
  require(s.boundary_jitter >= 0.0 && std::isfinite(s.boundary_jitter), "phantom: jitter must be >= 0");
  require(s.speckle_looks > 0.0 && std::isfinite(s.speckle_looks), "phantom: speckle looks must be > 0");
  require(s.frames_per_average >= 1, "phantom: frames_per_average must be >= 1");
  for (const auto& strip : s.artifact_strips)
    require(strip.rows.begin < strip.rows.end && strip.rows.end <= s.height, "phantom: artifact strip out of bounds");
}

// Seed of the j-th ART1 realization inside frame i.
constexpr std::uint64_t speckle_seed(std::uint64_t seed, std::size_t frame, std::size_t realization) {
  return derive_seed(seed, 0x5e11'0000ULL + frame, realization);
}

inline ImageTensor generate_clean(const PhantomSpec& spec) {
  validate(spec);
  Rng rng = make_rng(derive_seed(spec.seed, 0xC1EAULL));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> freq(0.5, 2.5);
  std::uniform_real_distribution<double> amp(0.3, 1.0);

  // Each boundary follows its own smooth curve in [-1, 1] scaled by the jitter.
  const std::size_t nb = spec.layer_boundaries.size();
  std::vector<std::vector<double>> boundary(nb, std::vector<double>(spec.width));
  for (std::size_t k = 0; k < nb; ++k) {
    double f[3], p[3], a[3], norm = 0.0;
    for (int m = 0; m < 3; ++m) {
      f[m] = freq(rng);
      p[m] = phase(rng);
      a[m] = amp(rng);
      norm += a[m];
    }
    for (std::size_t x = 0; x < spec.width; ++x) {
      double s = 0.0;
      for (int m = 0; m < 3; ++m)
        s += a[m] * std::sin(2.0 * std::numbers::pi * f[m] * static_cast<double>(x) / spec.width + p[m]);
      const double offset = spec.boundary_jitter > 0.0 ? spec.boundary_jitter * s / norm : 0.0;
      boundary[k][x] = static_cast<double>(spec.layer_boundaries[k]) + offset;
    }
  }

  ImageTensor img(spec.height, spec.width);
  for (std::size_t r = 0; r < spec.height; ++r)
    for (std::size_t x = 0; x < spec.width; ++x) {
      std::size_t layer = 0;
      for (std::size_t k = 0; k < nb; ++k)
        if (static_cast<double>(r) >= boundary[k][x]) layer = k + 1;
      img(r, x) = spec.layer_reflectivities[layer];
    }
  return img;
}

// Multiplicative unit-mean gamma speckle (shape L, scale 1/L), clamped to [0,1].
inline ImageTensor apply_speckle(const ImageTensor& img, double looks, std::uint64_t seed) {
  detail::require(looks > 0.0 && std::isfinite(looks), "apply_speckle: looks must be > 0");
  Rng rng = make_rng(seed);
  std::gamma_distribution<double> gain(looks, 1.0 / looks);
  ImageTensor out(img.height(), img.width());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = std::clamp(img[i] * gain(rng), 0.0, 1.0);
  return out;
}

inline ImageTensor apply_motion_artifact(const ImageTensor& img, const std::vector<RowRange>& strips) {
  for (const auto& s : strips)
    if (s.begin > s.end || s.end > img.height())
      throw InvalidInput("apply_motion_artifact: rows [" + std::to_string(s.begin) + "," + std::to_string(s.end) +
                         ") outside image of height " + std::to_string(img.height()));
  ImageTensor out = img;
  for (const auto& s : strips)
    for (std::size_t r = s.begin; r < s.end; ++r)
      for (std::size_t c = 0; c < img.width(); ++c) out(r, c) = 0.0;
  return out;
}

struct ArtSeries {
  ImageTensor clean;
  std::vector<ImageTensor> frames;
};

// One frame: mean of frames_per_average speckle realizations, then its strips zeroed.
inline ImageTensor generate_frame(const PhantomSpec& spec, const ImageTensor& clean, std::size_t frame_index) {
  ImageTensor frame;
  if (spec.frames_per_average == 1) {
    frame = apply_speckle(clean, spec.speckle_looks, speckle_seed(spec.seed, frame_index, 0));
  } else {
    frame = ImageTensor(clean.height(), clean.width());
    for (std::size_t j = 0; j < spec.frames_per_average; ++j) {
      const ImageTensor one = apply_speckle(clean, spec.speckle_looks, speckle_seed(spec.seed, frame_index, j));
      for (std::size_t i = 0; i < frame.size(); ++i) frame[i] += one[i];
    }
    const double inv = 1.0 / static_cast<double>(spec.frames_per_average);
    for (auto& v : frame.values()) v *= inv;
  }
  std::vector<RowRange> strips;
  for (const auto& s : spec.artifact_strips)
    if (s.frame_index == frame_index) strips.push_back(s.rows);
  return strips.empty() ? frame : apply_motion_artifact(frame, strips);
}

inline ArtSeries generate_art_series(const PhantomSpec& spec, std::size_t n_frames) {
  detail::require(n_frames >= 1, "generate_art_series: n_frames must be >= 1");
  validate(spec);
  for (const auto& s : spec.artifact_strips)
    detail::require(s.frame_index < n_frames, "generate_art_series: artifact strip references frame " +
                                                  std::to_string(s.frame_index) + " of " + std::to_string(n_frames));
  ArtSeries series{generate_clean(spec), {}};
  series.frames.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) series.frames.push_back(generate_frame(spec, series.clean, i));
  return series;
}

}  // namespace vitreoforge
