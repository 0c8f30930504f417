#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "vitreoforge/evalstats.hpp"

using namespace vitreoforge;
using namespace vitreoforge::stats;

namespace {

Ranking random_ranking(Rng& rng) {
  Ranking r{1, 2, 3, 4, 5, 6};
  std::shuffle(r.begin(), r.end(), rng);
  return r;
}

std::vector<RankingResponse> random_responses(std::size_t n, Rng& rng) {
  std::vector<RankingResponse> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({"g" + std::to_string(i % 7), "q" + std::to_string(i), random_ranking(rng)});
  return out;
}

// Two-sided exact p by enumerating every sign assignment of the non-zero |d| midranks.
double brute_signed_rank_p(const std::vector<double>& d) {
  std::vector<double> nz;
  for (double x : d)
    if (x != 0) nz.push_back(x);
  const std::size_t n = nz.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(nz[j]) < std::abs(nz[i])) ++less;
      if (std::abs(nz[j]) == std::abs(nz[i])) ++equal;
    }
    ranks[i] = less + (equal + 1) / 2.0;
  }
  double w = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (nz[i] > 0) w += ranks[i];
  double le = 0, ge = 0;
  const std::size_t total = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += ranks[i];
    if (s <= w + 1e-9) ++le;
    if (s >= w - 1e-9) ++ge;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / static_cast<double>(total));
}

double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST(Ranking, PermutationValidation) {
  EXPECT_NO_THROW(validate_ranking({6, 5, 4, 3, 2, 1}));
  EXPECT_THROW(validate_ranking({1, 2, 2, 3, 4, 5}), InvalidInput);
  EXPECT_THROW(validate_ranking({0, 1, 2, 3, 4, 5}), InvalidInput);
  EXPECT_THROW(validate_ranking({1, 2, 3, 4, 5, 7}), InvalidInput);
}

TEST(MeanRank, ConstantRanking) {
  std::vector<RankingResponse> rs;
  for (int q = 0; q < 10; ++q) rs.push_back({"g1", "q" + std::to_string(q), {2, 3, 1, 4, 6, 5}});
  const auto m = mean_rank(rs, {1000, 0.95, 1});
  EXPECT_EQ(m[1].label, "cDDPM");
  EXPECT_DOUBLE_EQ(m[1].mean, 3.0);
  for (const auto& x : m) {
    EXPECT_EQ(x.ci_low, x.mean);
    EXPECT_EQ(x.ci_high, x.mean);
  }
}

TEST(MeanRank, RowSumIsTwentyOne) {
  Rng rng = make_rng(1);
  for (int k = 0; k < 200; ++k) {
    const auto rs = random_responses(1 + k % 30, rng);
    const auto m = mean_rank(rs, {20, 0.95, static_cast<std::uint64_t>(k)});
    double s = 0;
    for (const auto& x : m) s += x.mean;
    EXPECT_NEAR(s, 21.0, 1e-12);
  }
}

TEST(MeanRank, CiContainsMeanAndIsReproducible) {
  Rng rng = make_rng(2);
  const auto rs = random_responses(70, rng);
  const auto a = mean_rank(rs, {10000, 0.95, 42});
  const auto b = mean_rank(rs, {10000, 0.95, 42});
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE(a[i].ci_low, a[i].mean);
    EXPECT_GE(a[i].ci_high, a[i].mean);
    EXPECT_LT(a[i].ci_low, a[i].ci_high);
    EXPECT_EQ(a[i].ci_low, b[i].ci_low);
    EXPECT_EQ(a[i].ci_high, b[i].ci_high);
  }
}

TEST(MeanRank, Errors) {
  EXPECT_THROW(mean_rank({}), InvalidInput);
  EXPECT_THROW(mean_rank({{"g", "q", {1, 1, 2, 3, 4, 5}}}), InvalidInput);
}

TEST(Wilcoxon, AllZeroGivesOne) {
  const auto r = wilcoxon_signed_rank(std::vector<double>(10, 0.0));
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.n_nonzero, 0u);
}

TEST(Wilcoxon, StrictlyWorseTwentyPairs) {
  std::vector<double> d(20, 2.0);
  const auto r = wilcoxon_signed_rank(d);
  EXPECT_LT(r.p_value, 1e-3);
  EXPECT_NEAR(r.p_value, 2.0 / std::pow(2.0, 20), 1e-15);
}

TEST(Wilcoxon, ExactReferenceValues) {
  EXPECT_NEAR(wilcoxon_signed_rank({1.5, -2.1, 3.3, 4.0, -0.7, 2.2, 5.1, -1.2, 0.9, 3.7}).p_value, 0.064453125, 1e-12);
  EXPECT_NEAR(
      wilcoxon_signed_rank({-3, 1, 4, -1.5, 9, 2.6, 5.3, -5.8, 3.2, 7.1, 8.4, -0.2, 6.6, 10.5}).p_value,
      0.029541015625, 1e-12);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTies) {
  Rng rng = make_rng(3);
  std::uniform_int_distribution<int> u(-3, 3);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> d(6 + k % 9);
    for (auto& x : d) x = u(rng);
    EXPECT_NEAR(wilcoxon_signed_rank(d).p_value, brute_signed_rank_p(d), 1e-12);
  }
}

TEST(Wilcoxon, NormalApproximationReference) {
  std::vector<double> d{1, 2, 3, 1, 2, 3, 4, 5, -1, -2, 1, 2, 3, 4, 2, 1, -3, 2, 2, 1,
                        3, 4, 1, 2, -1, 5, 3, 2, 1, 0, 2, 3, -2, 1, 4, 2, 3, 1, 2, -4};
  const auto r = wilcoxon_signed_rank(d);
  EXPECT_FALSE(r.exact);
  EXPECT_EQ(r.n_nonzero, 39u);
  EXPECT_NEAR(r.p_value, 9.13689382262236e-05, 1e-12);
}

TEST(Wilcoxon, SwapKeepsTwoSidedP) {
  std::vector<double> d{3, -1, 2, 5, 4, -2, 1, 6};
  std::vector<double> neg(d.size());
  std::transform(d.begin(), d.end(), neg.begin(), [](double x) { return -x; });
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(d).p_value, wilcoxon_signed_rank(neg).p_value);
}

TEST(Wilcoxon, TooFewPairs) { EXPECT_THROW(wilcoxon_signed_rank({1, 2, 3, 4, 5}), InvalidInput); }

TEST(SignTest, Reference) {
  std::vector<double> d{1, 1, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 0};
  EXPECT_NEAR(sign_test(d).p_value, 0.14599609375, 1e-12);
}

TEST(Pairwise, AgainstSignalAveraging) {
  std::vector<RankingResponse> rs;
  for (int q = 0; q < 20; ++q) rs.push_back({"g", "q" + std::to_string(q), {1, 2, 6, 3, 4, 5}});
  const auto res = pairwise_vs_reference(rs);
  ASSERT_EQ(res.size(), 5u);
  EXPECT_EQ(res[0].label, "cDDPM");
  for (const auto& r : res) EXPECT_LT(r.test.p_value, 1e-3);
  const auto self = pairwise_vs_reference(rs, "BBDM", PairedTest::Sign);
  EXPECT_EQ(self[0].label, "signal-averaging");
  EXPECT_THROW(pairwise_vs_reference(rs, "GAN"), InvalidInput);
}

TEST(Holm, HandCases) {
  const auto a = holm_adjust({0.01, 0.04});
  EXPECT_NEAR(a[0], 0.02, 1e-15);
  EXPECT_NEAR(a[1], 0.04, 1e-15);
  EXPECT_EQ(holm_adjust({0.3}), std::vector<double>{0.3});
  EXPECT_EQ(holm_adjust({1.0, 1.0, 1.0}), std::vector<double>(3, 1.0));
  // step-down with a monotonicity carry: (0.04, 0.01, 0.03) -> (0.06, 0.03, 0.06)
  const auto b = holm_adjust({0.04, 0.01, 0.03});
  EXPECT_NEAR(b[0], 0.06, 1e-15);
  EXPECT_NEAR(b[1], 0.03, 1e-15);
  EXPECT_NEAR(b[2], 0.06, 1e-15);
}

TEST(Holm, Properties) {
  Rng rng = make_rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> p(1 + k % 8);
    for (auto& v : p) v = u(rng);
    std::sort(p.begin(), p.end());
    const auto a = holm_adjust(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_GE(a[i], p[i]);
      if (i) {
        EXPECT_GE(a[i], a[i - 1]);
      }
    }
  }
}

TEST(Holm, OutOfRange) {
  EXPECT_THROW(holm_adjust({0.5, 1.5}), InvalidInput);
  EXPECT_THROW(holm_adjust({-0.1}), InvalidInput);
}

TEST(FoolRate, Values) {
  std::vector<SpotResponse> rs;
  for (int i = 0; i < 70; ++i)
    rs.push_back({"g" + std::to_string(i / 10), "q" + std::to_string(i % 10),
                  i < 23 ? SpotChoice::Generated : SpotChoice::Real});
  EXPECT_EQ(format_percent(fool_rate(rs)), "32.9");
  EXPECT_DOUBLE_EQ(round1(fool_rate(rs)), 32.9);
  std::reverse(rs.begin(), rs.end());
  EXPECT_EQ(format_percent(fool_rate(rs)), "32.9");
  for (auto& r : rs) r.chosen = SpotChoice::Real;
  EXPECT_EQ(format_percent(fool_rate(rs)), "0.0");
  for (auto& r : rs) r.chosen = SpotChoice::Generated;
  EXPECT_EQ(format_percent(fool_rate(rs)), "100.0");
  EXPECT_THROW(fool_rate({}), InvalidInput);
}

TEST(Preservation, Values) {
  std::vector<AnatomyResponse> rs{{"g", "q", 0, AnatomyAnswer::Yes, ""},
                                  {"g", "q", 1, AnatomyAnswer::NotPresent, ""},
                                  {"g", "q", 5, AnatomyAnswer::No, "blurred"}};
  EXPECT_EQ(format_percent(preservation(rs)), "66.7");
  EXPECT_DOUBLE_EQ(preservation(rs, vitreous_structures()), 100.0);
  EXPECT_DOUBLE_EQ(preservation(rs, other_structures()), 0.0);
  EXPECT_THROW(preservation(rs, {8}), InvalidInput);
  EXPECT_EQ(std::string(kStructureNames[2]), "area of Martegiani");
}

TEST(Stratify, Partition) {
  std::vector<GraderProfile> profiles{{"a", 2}, {"b", 5}, {"c", 11}};
  std::vector<SpotResponse> rs{{"a", "q1", SpotChoice::Real}, {"b", "q1", SpotChoice::Real},
                               {"c", "q1", SpotChoice::Generated}, {"a", "q2", SpotChoice::Real}};
  const auto s = stratify(rs, profiles);
  EXPECT_EQ(s.below.size(), 2u);
  EXPECT_EQ(s.at_least.size(), 2u);
  EXPECT_EQ(s.at_least[0].grader_id, "b");
  const auto all_below = stratify(rs, profiles, 100);
  EXPECT_TRUE(all_below.at_least.empty());
  EXPECT_THROW(stratify(rs, {{"a", 2}, {"b", 5}}), InvalidInput);
  EXPECT_THROW(stratify(rs, {{"a", 2}, {"a", 3}}), InvalidInput);
}

TEST(Correlation, PearsonMatchesDirectFormula) {
  Rng rng = make_rng(5);
  std::normal_distribution<double> n(0, 1);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> x(10), y(10);
    for (auto& v : x) v = n(rng);
    for (auto& v : y) v = n(rng);
    const auto m = correlation_matrix({{"x", x}, {"y", y}});
    EXPECT_NEAR(m.r[0][1], naive_pearson(x, y), 1e-12);
    EXPECT_EQ(m.r[0][1], m.r[1][0]);
    EXPECT_EQ(m.r[0][0], 1.0);
  }
}

TEST(Correlation, ReferenceValues) {
  EXPECT_NEAR(correlation_matrix({{"a", {1, 2, 3, 4, 5.5}}, {"b", {2, 1, 4, 3, 7}}}).r[0][1], 0.8580868382401787,
              1e-12);
  EXPECT_NEAR(correlation_matrix({{"a", {1, 2, 3, 4, 5.5, 2}}, {"b", {2, 1, 4, 3, 7, 9}}}, CorrelationKind::Spearman)
                  .r[0][1],
              0.4058397249567139, 1e-12);
}

TEST(Correlation, SpearmanAntiMonotone) {
  const auto m = correlation_matrix({{"up", {1, 2, 4, 8, 16}}, {"down", {9, 3, 2, 1, 0.5}}}, CorrelationKind::Spearman);
  EXPECT_DOUBLE_EQ(m.r[0][1], -1.0);
}

TEST(Correlation, ZeroVarianceFlagged) {
  const auto m = correlation_matrix({{"x", {1, 2, 3}}, {"flat", {2, 2, 2}}});
  EXPECT_FALSE(m.defined(0, 1));
  EXPECT_FALSE(m.defined(1, 1));
  EXPECT_TRUE(m.defined(0, 0));
  ASSERT_EQ(m.undefined.size(), 1u);
  EXPECT_EQ(m.undefined[0], "flat");
}

TEST(Correlation, Errors) {
  EXPECT_THROW(correlation_matrix({{"x", {1, 2, 3}}, {"y", {1, 2}}}), InvalidInput);
  EXPECT_THROW(correlation_matrix({{"x", {1, 2}}, {"y", {1, 2}}}), InvalidInput);
}
