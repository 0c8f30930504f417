#include <gtest/gtest.h>

#include <cmath>

#include "vitreoforge/phantom.hpp"

using namespace vitreoforge;

TEST(Phantom, TwoLayerZeroJitter) {
  PhantomSpec spec;
  spec.height = 20;
  spec.width = 8;
  spec.layer_boundaries = {10};
  spec.layer_reflectivities = {0.1, 0.8};
  spec.boundary_jitter = 0.0;
  const auto img = generate_clean(spec);
  for (std::size_t r = 0; r < 20; ++r)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(img(r, c), r < 10 ? 0.1 : 0.8);
}

TEST(Phantom, JitterMovesBoundariesSmoothly) {
  PhantomSpec spec;
  spec.boundary_jitter = 3.0;
  spec.seed = 42;
  const auto a = generate_clean(spec), b = generate_clean(spec);
  EXPECT_TRUE(a == b);
  spec.seed = 43;
  EXPECT_FALSE(generate_clean(spec) == a);
  // every pixel still takes one of the layer values
  for (double v : a.values()) {
    bool found = false;
    for (double r : spec.layer_reflectivities) found |= v == r;
    EXPECT_TRUE(found);
  }
}

TEST(Phantom, ValidateRejectsBadSpecs) {
  PhantomSpec spec;
  spec.layer_boundaries = {20, 10};
  spec.layer_reflectivities = {0.1, 0.2, 0.3};
  EXPECT_THROW(generate_clean(spec), InvalidInput);
  spec = PhantomSpec{};
  spec.layer_reflectivities.back() = 1.5;
  EXPECT_THROW(generate_clean(spec), InvalidInput);
  spec = PhantomSpec{};
  spec.speckle_looks = 0.0;
  EXPECT_THROW(validate(spec), InvalidInput);
  spec = PhantomSpec{};
  spec.artifact_strips = {{{60, 70}, 0}};
  EXPECT_THROW(validate(spec), InvalidInput);
  spec = PhantomSpec{};
  spec.layer_boundaries = {16};
  EXPECT_THROW(validate(spec), InvalidInput);
}

TEST(Speckle, ZeroStaysZeroAndDeterministic) {
  ImageTensor img(4, 4);
  img(1, 1) = 0.5;
  const auto a = apply_speckle(img, 1.0, 9);
  EXPECT_TRUE(a == apply_speckle(img, 1.0, 9));
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (img[i] == 0.0) {
      EXPECT_EQ(a[i], 0.0);
    }
  }
  EXPECT_THROW(apply_speckle(img, -1.0, 1), InvalidInput);
}

TEST(Speckle, ManyLooksIsNearlyClean) {
  ImageTensor img(8, 8);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = 0.1 + 0.8 * static_cast<double>(i) / 64.0;
  const auto out = apply_speckle(img, 1e6, 3);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out[i] / img[i], 1.0, 0.01);
}

TEST(Speckle, UnitMeanMultiplier) {
  ImageTensor img(1, 1, {0.5});
  double sum = 0.0;
  // With L = 10 the clamp at 1 is hit with negligible probability (needs a gain > 2).
  for (std::uint64_t k = 0; k < 10000; ++k) sum += apply_speckle(img, 10.0, k)[0];
  EXPECT_NEAR(sum / 10000.0, 0.5, 0.005);
}

TEST(MotionArtifact, ZeroesExactRows) {
  ImageTensor img(10, 4);
  for (auto& v : img.values()) v = 0.3;
  const auto out = apply_motion_artifact(img, {{2, 5}});
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(out(r, c), r >= 2 && r < 5 ? 0.0 : 0.3);
  EXPECT_TRUE(apply_motion_artifact(img, {}) == img);
  const auto all = apply_motion_artifact(img, {{0, 10}});
  for (double v : all.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(apply_motion_artifact(img, {{8, 11}}), InvalidInput);
}

TEST(ArtSeries, SharedCleanAndPerFrameStrips) {
  PhantomSpec spec;
  spec.seed = 5;
  spec.artifact_strips = {{{20, 24}, 3}};
  const auto s = generate_art_series(spec, 10);
  ASSERT_EQ(s.frames.size(), 10u);
  EXPECT_TRUE(s.clean == generate_clean(spec));
  for (std::size_t i = 0; i < 10; ++i) {
    double strip_sum = 0.0;
    for (std::size_t r = 20; r < 24; ++r)
      for (std::size_t c = 0; c < spec.width; ++c) strip_sum += s.frames[i](r, c);
    if (i == 3) {
      EXPECT_EQ(strip_sum, 0.0);
    } else {
      EXPECT_GT(strip_sum, 0.0);
    }
  }
  EXPECT_TRUE(s.frames[7] == generate_frame(spec, s.clean, 7));
  spec.artifact_strips = {{{20, 24}, 10}};
  EXPECT_THROW(generate_art_series(spec, 10), InvalidInput);
  EXPECT_THROW(generate_art_series(spec, 0), InvalidInput);
}

TEST(ArtSeries, SingleFrameIsSpeckledClean) {
  PhantomSpec spec;
  spec.seed = 11;
  spec.speckle_looks = 3.0;
  const auto s = generate_art_series(spec, 1);
  EXPECT_TRUE(s.frames[0] == apply_speckle(s.clean, 3.0, speckle_seed(11, 0, 0)));
}

TEST(ArtSeries, AveragingShrinksVariance) {
  // Per-pixel sample variance of an N-frame mean is about 1/N of a single frame's.
  PhantomSpec spec;
  spec.height = 4;
  spec.width = 4;
  spec.layer_boundaries = {2};
  spec.layer_reflectivities = {0.2, 0.3};
  spec.boundary_jitter = 0.0;
  spec.speckle_looks = 20.0;
  const auto clean = generate_clean(spec);
  auto var_of = [&](std::size_t n) {
    spec.frames_per_average = n;
    double sum = 0.0, sq = 0.0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
      spec.seed = 1000 + static_cast<std::uint64_t>(t);
      const double v = generate_frame(spec, clean, 0)(0, 0);
      sum += v;
      sq += v * v;
    }
    const double m = sum / trials;
    return (sq - trials * m * m) / (trials - 1);
  };
  const double ratio = var_of(1) / var_of(10);
  EXPECT_NEAR(ratio, 10.0, 1.5);
}
