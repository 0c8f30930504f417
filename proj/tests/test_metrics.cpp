#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vitreoforge/metrics.hpp"
#include "vitreoforge/rng.hpp"

using namespace vitreoforge;

namespace {

ImageTensor random_image(std::size_t h, std::size_t w, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageTensor img(h, w);
  for (auto& v : img.values()) v = u(rng);
  return img;
}

double naive_mse(const ImageTensor& a, const ImageTensor& b) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.height(); ++r)
    for (std::size_t c = 0; c < a.width(); ++c) s += std::pow(a(r, c) - b(r, c), 2);
  return s / static_cast<double>(a.height() * a.width());
}

// Direct windowed SSIM with a 2-D Gaussian kernel and centred moments.
double naive_ssim(const ImageTensor& a, const ImageTensor& b) {
  const int k = 11, half = 5;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double wsum = 0.0;
  std::vector<double> w(k * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double di = i - half, dj = j - half;
      w[i * k + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      wsum += w[i * k + j];
    }
  for (double& v : w) v /= wsum;
  double total = 0.0;
  int count = 0;
  for (std::size_t r = 0; r + k <= a.height(); ++r)
    for (std::size_t c = 0; c + k <= a.width(); ++c) {
      double ma = 0, mb = 0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          ma += w[i * k + j] * a(r + i, c + j);
          mb += w[i * k + j] * b(r + i, c + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          const double da = a(r + i, c + j) - ma, db = b(r + i, c + j) - mb;
          va += w[i * k + j] * da * da;
          vb += w[i * k + j] * db * db;
          cov += w[i * k + j] * da * db;
        }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST(Mse, TrivialCases) {
  ImageTensor a(4, 4, 0.3), b(4, 4, 0.4);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
}

TEST(Mse, MatchesLoopOracle) {
  Rng rng = make_rng(11);
  for (int k = 0; k < 20; ++k) {
    const auto a = random_image(8, 8, rng), b = random_image(8, 8, rng);
    EXPECT_NEAR(mse(a, b), naive_mse(a, b), 1e-12);
  }
}

TEST(Mse, ShapeMismatch) { EXPECT_THROW(mse(ImageTensor(2, 2), ImageTensor(2, 3)), InvalidInput); }

TEST(Psnr, TwentyDecibels) {
  ImageTensor a(10, 10, 0.5), b(10, 10, 0.6);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_NEAR(psnr(a, b, 2.0), 20.0 + 20.0 * std::log10(2.0), 1e-9);
}

TEST(Psnr, IdenticalIsInfinitySentinel) {
  ImageTensor a(3, 3, 0.1);
  EXPECT_TRUE(is_sentinel(psnr(a, a)));
  EXPECT_EQ(format_metric(psnr(a, a)), "inf");
}

TEST(Psnr, StrictlyDecreasingInMse) {
  ImageTensor a(4, 4, 0.0);
  double prev = kInfinitePsnr;
  for (int k = 1; k <= 20; ++k) {
    ImageTensor b(4, 4, 0.01 * k);
    const double p = psnr(a, b);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(MaskedPsnr, FullMaskIsBitIdentical) {
  Rng rng = make_rng(3);
  for (int k = 0; k < 10; ++k) {
    const auto a = random_image(13, 9, rng), b = random_image(13, 9, rng);
    EXPECT_EQ(masked_psnr(a, b, RoiMask(13, 9, true)), psnr(a, b));
  }
}

TEST(MaskedPsnr, RestrictsToRoi) {
  ImageTensor a(4, 4, 0.5), b(4, 4, 0.5);
  RoiMask roi(4, 4);
  roi.set(0, 0, true);
  roi.set(1, 1, true);
  b(3, 3) = 0.0;
  EXPECT_TRUE(is_sentinel(masked_psnr(a, b, roi)));
  b(1, 1) = 0.4;
  // mse over ROI = 0.01 / 2
  EXPECT_NEAR(masked_psnr(a, b, roi), 10.0 * std::log10(200.0), 1e-9);
}

TEST(MaskedPsnr, EmptyRoiRejected) {
  ImageTensor a(4, 4);
  EXPECT_THROW(masked_psnr(a, a, RoiMask(4, 4)), InvalidInput);
  EXPECT_THROW(masked_psnr(a, a, RoiMask(3, 4, true)), InvalidInput);
}

TEST(Ssim, IdentityIsOne) {
  Rng rng = make_rng(5);
  const auto a = random_image(16, 16, rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, StructuredVsNoiseBelowOne) {
  Rng rng = make_rng(6);
  ImageTensor a(32, 32);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 32; ++c) a(r, c) = (r / 4) % 2 ? 0.8 : 0.2;
  EXPECT_LT(ssim(a, random_image(32, 32, rng)), 1.0);
}

TEST(Ssim, MatchesDirectFormula) {
  Rng rng = make_rng(7);
  for (int k = 0; k < 10; ++k) {
    const auto a = random_image(16, 16, rng), b = random_image(16, 16, rng);
    EXPECT_NEAR(ssim(a, b), naive_ssim(a, b), 1e-9);
  }
}

TEST(Ssim, Symmetric) {
  Rng rng = make_rng(8);
  const auto a = random_image(20, 15, rng), b = random_image(20, 15, rng);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
}

TEST(Ssim, TooSmallRejected) {
  ImageTensor a(10, 20);
  EXPECT_THROW(ssim(a, a), InvalidInput);
  SsimConfig cfg;
  cfg.window = 4;
  EXPECT_THROW(ssim(ImageTensor(16, 16), ImageTensor(16, 16), cfg), InvalidInput);
}

TEST(Perceptual, StandInProperties) {
  Rng rng = make_rng(9);
  const auto a = random_image(12, 12, rng), b = random_image(12, 12, rng);
  EXPECT_EQ(perceptual_distance(a, a, "gradient-mse"), 0.0);
  EXPECT_EQ(perceptual_distance(a, b, "gradient-mse"), perceptual_distance(b, a, "gradient-mse"));
  EXPECT_GE(perceptual_distance(a, b, "gradient-mse"), 0.0);
  ImageTensor flat(12, 12, 0.5), edge(12, 12, 0.5);
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t c = 6; c < 12; ++c) edge(r, c) = 1.0;
  EXPECT_GT(perceptual_distance(flat, edge, "gradient-mse"), perceptual_distance(flat, flat, "gradient-mse"));
}

TEST(Perceptual, LabelledNonLpips) {
  const auto& b = default_perceptual_registry().get("gradient-mse");
  EXPECT_NE(b.label().find("non-LPIPS"), std::string::npos);
}

TEST(Perceptual, UnknownBackend) {
  ImageTensor a(4, 4);
  EXPECT_THROW(perceptual_distance(a, a, "lpips"), InvalidInput);
}

TEST(Perceptual, ExternalBackendRegistration) {
  struct L1 final : PerceptualBackend {
    std::string name() const override { return "l1"; }
    std::string label() const override { return "l1"; }
    double distance(const ImageTensor& a, const ImageTensor& b) const override {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
      return s;
    }
  };
  PerceptualRegistry reg;
  reg.add(std::make_shared<L1>());
  EXPECT_DOUBLE_EQ(perceptual_distance(ImageTensor(2, 2, 0.0), ImageTensor(2, 2, 0.5), "l1", reg), 2.0);
}

TEST(Summary, SinglePairZeroStd) {
  const auto s = summarize("psnr", {27.5});
  EXPECT_EQ(s.mean_std(), "27.500 ± 0.000");
}

TEST(Summary, SampleStd) {
  const auto s = summarize("psnr", {20.0, 30.0});
  EXPECT_EQ(format_metric(s.mean), "25.000");
  EXPECT_EQ(format_metric(s.std), "7.071");
  EXPECT_EQ(summarize("x", {30.23, 28.0, 32.4}).mean_std().find(" ± "), 6u);
}

TEST(Summary, SentinelsExcludedAndCounted) {
  const auto s = summarize("psnr", {20.0, kInfinitePsnr, 30.0});
  EXPECT_EQ(s.n, 2u);
  EXPECT_EQ(s.n_excluded, 1u);
  EXPECT_DOUBLE_EQ(s.mean, 25.0);
}

TEST(Report, BaselineRowAndTable) {
  std::vector<EvalPair> pairs;
  for (int k = 0; k < 3; ++k) {
    EvalPair p;
    p.ground_truth = ImageTensor(16, 16, 0.5);
    p.generated = ImageTensor(16, 16, 0.5 + 0.01 * (k + 1));
    p.input = ImageTensor(16, 16, 0.7);
    p.roi = RoiMask(16, 16, true);
    pairs.push_back(p);
  }
  pairs[0].generated = pairs[0].ground_truth;
  const auto rep = metric_report(pairs);
  ASSERT_EQ(rep.metrics.size(), 5u);
  EXPECT_EQ(rep.summary[1].metric, "psnr");
  EXPECT_EQ(rep.summary[1].n, 2u);
  EXPECT_EQ(rep.summary[1].n_excluded, 1u);
  ASSERT_EQ(rep.baseline.size(), 5u);
  EXPECT_NEAR(rep.baseline[1].mean, 10.0 * std::log10(25.0), 1e-9);
  const auto table = report_table(rep, ',');
  EXPECT_EQ(table.substr(0, table.find('\n')), "metric,mean,std,n,n_excluded");
  EXPECT_NE(table.find("baseline:psnr,"), std::string::npos);
  EXPECT_NE(render_report(rep).find("non-LPIPS"), std::string::npos);
}

TEST(Report, Errors) {
  EXPECT_THROW(metric_report({}), InvalidInput);
  EvalPair p{ImageTensor(16, 16), ImageTensor(16, 16), std::nullopt, std::nullopt};
  MetricOptions opt;
  opt.perceptual_backend = "nope";
  EXPECT_THROW(metric_report({p}, opt), InvalidInput);
}
