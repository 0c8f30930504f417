#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vitreoforge/error.hpp"
#include "vitreoforge/rng.hpp"

namespace vitreoforge::stats {

inline constexpr std::size_t kNumModels = 6;
inline constexpr std::array<const char*, kNumModels> kModelLabels = {"signal-averaging", "cDDPM", "BBDM",
                                                                     "U-Net",            "Pix2Pix", "VQ-GAN"};

inline std::size_t model_index(const std::string& label) {
  for (std::size_t i = 0; i < kNumModels; ++i)
    if (label == kModelLabels[i]) return i;
  throw InvalidInput("unknown model label '" + label + "'");
}

// Anatomy sub-questions; the first kNumVitreousStructures belong to the vitreous body.
inline constexpr std::size_t kNumStructures = 9;
inline constexpr std::size_t kNumVitreousStructures = 4;
inline constexpr std::array<const char*, kNumStructures> kStructureNames = {
    "posterior vitreous membrane", "bursa praemacularis", "area of Martegiani", "hyalocytes",
    "retinal layers",              "optic nerve head",    "choroid",            "choroid-sclera interface",
    "pathological structures"};

inline std::vector<std::size_t> vitreous_structures() { return {0, 1, 2, 3}; }
inline std::vector<std::size_t> other_structures() { return {4, 5, 6, 7, 8}; }

// ranks[i] is the rank (1 = best) given to kModelLabels[i].
using Ranking = std::array<int, kNumModels>;

struct RankingResponse {
  std::string grader_id;
  std::string question_id;
  Ranking ranks{};
};

enum class SpotChoice { Real, Generated };

struct SpotResponse {
  std::string grader_id;
  std::string question_id;
  SpotChoice chosen = SpotChoice::Real;
  bool correct() const noexcept { return chosen == SpotChoice::Real; }
};

enum class AnatomyAnswer { Yes, No, NotPresent };

inline std::string to_string(AnatomyAnswer a) {
  switch (a) {
    case AnatomyAnswer::Yes: return "Yes";
    case AnatomyAnswer::No: return "No";
    case AnatomyAnswer::NotPresent: return "NotPresent";
  }
  return "?";
}

inline AnatomyAnswer anatomy_answer_from_string(const std::string& s) {
  if (s == "Yes") return AnatomyAnswer::Yes;
  if (s == "No") return AnatomyAnswer::No;
  if (s == "NotPresent") return AnatomyAnswer::NotPresent;
  throw InvalidInput("anatomy answer must be Yes, No or NotPresent, got '" + s + "'");
}

struct AnatomyResponse {
  std::string grader_id;
  std::string question_id;
  std::size_t structure = 0;
  AnatomyAnswer answer = AnatomyAnswer::Yes;
  std::string comment;
};

struct GraderProfile {
  std::string grader_id;
  int years_experience = 0;
};

// Throws unless ranks is a permutation of 1..6.
inline void validate_ranking(const Ranking& ranks) {
  std::array<bool, kNumModels> seen{};
  for (int r : ranks) {
    if (r < 1 || r > static_cast<int>(kNumModels))
      throw InvalidInput("rank " + std::to_string(r) + " outside 1..6");
    if (seen[static_cast<std::size_t>(r - 1)]) throw InvalidInput("duplicate rank " + std::to_string(r));
    seen[static_cast<std::size_t>(r - 1)] = true;
  }
}

// Linear interpolation between order statistics (the common "type 7" rule).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw InvalidInput("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct BootstrapConfig {
  std::size_t resamples = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

struct MeanRank {
  std::string label;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Mean rank per label with a percentile bootstrap CI over responses.
// Resample b draws from its own stream derive_seed(seed, b).
inline std::vector<MeanRank> mean_rank(const std::vector<RankingResponse>& responses, const BootstrapConfig& cfg = {}) {
  if (responses.empty()) throw InvalidInput("mean_rank: no responses");
  if (cfg.resamples == 0) throw InvalidInput("mean_rank: need at least one bootstrap resample");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InvalidInput("mean_rank: confidence level must lie in (0, 1)");
  for (const auto& r : responses) validate_ranking(r.ranks);
  const std::size_t n = responses.size();
  std::array<double, kNumModels> sum{};
  for (const auto& r : responses)
    for (std::size_t m = 0; m < kNumModels; ++m) sum[m] += r.ranks[m];

  std::array<std::vector<double>, kNumModels> boot;
  for (auto& b : boot) b.reserve(cfg.resamples);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t b = 0; b < cfg.resamples; ++b) {
    Rng rng = make_rng(derive_seed(cfg.seed, b));
    std::array<double, kNumModels> s{};
    for (std::size_t k = 0; k < n; ++k) {
      const auto& r = responses[pick(rng)];
      for (std::size_t m = 0; m < kNumModels; ++m) s[m] += r.ranks[m];
    }
    for (std::size_t m = 0; m < kNumModels; ++m) boot[m].push_back(s[m] / static_cast<double>(n));
  }
  const double alpha = 1.0 - cfg.level;
  std::vector<MeanRank> out;
  for (std::size_t m = 0; m < kNumModels; ++m)
    out.push_back({kModelLabels[m], sum[m] / static_cast<double>(n), quantile(boot[m], alpha / 2.0),
                   quantile(boot[m], 1.0 - alpha / 2.0)});
  return out;
}

// Standard normal upper tail.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Average ranks (1-based) with ties sharing the mean of their positions.
inline std::vector<double> midranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  return rank;
}

struct SignedRankResult {
  std::size_t n = 0;          // pairs supplied
  std::size_t n_nonzero = 0;  // pairs left after dropping zero differences
  double w_plus = 0.0;        // sum of ranks of positive differences
  double p_value = 1.0;       // two-sided
  bool exact = true;
};

inline constexpr std::size_t kMinPairs = 6;
inline constexpr std::size_t kExactLimit = 25;

// Paired two-sided Wilcoxon signed-rank test on differences d. Zero differences are
// dropped; with nothing left p = 1. Exact null for up to 25 non-zero pairs (ties
// handled through doubled midranks), otherwise normal with continuity and tie correction.
inline SignedRankResult wilcoxon_signed_rank(const std::vector<double>& d) {
  if (d.size() < kMinPairs)
    throw InvalidInput("signed-rank test needs at least " + std::to_string(kMinPairs) + " pairs, got " +
                       std::to_string(d.size()));
  SignedRankResult res;
  res.n = d.size();
  std::vector<double> nz;
  for (double x : d)
    if (x != 0.0) nz.push_back(x);
  res.n_nonzero = nz.size();
  if (nz.empty()) return res;
  std::vector<double> absd(nz.size());
  std::transform(nz.begin(), nz.end(), absd.begin(), [](double x) { return std::abs(x); });
  const auto rk = midranks(absd);
  for (std::size_t i = 0; i < nz.size(); ++i)
    if (nz[i] > 0) res.w_plus += rk[i];
  const double n = static_cast<double>(nz.size());

  if (nz.size() <= kExactLimit) {
    // Distribution of 2*W+ under random signs.
    std::vector<int> r2(rk.size());
    std::transform(rk.begin(), rk.end(), r2.begin(), [](double r) { return static_cast<int>(std::lround(2.0 * r)); });
    const int total = std::accumulate(r2.begin(), r2.end(), 0);
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (int r : r2)
      for (int s = total; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
    const int w2 = static_cast<int>(std::lround(2.0 * res.w_plus));
    double le = 0.0, ge = 0.0, all = 0.0;
    for (int s = 0; s <= total; ++s) {
      const double c = count[static_cast<std::size_t>(s)];
      all += c;
      if (s <= w2) le += c;
      if (s >= w2) ge += c;
    }
    res.p_value = std::min(1.0, 2.0 * std::min(le, ge) / all);
    res.exact = true;
    return res;
  }

  res.exact = false;
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::map<double, std::size_t> ties;
  for (double r : rk) ++ties[r];
  for (const auto& [r, t] : ties) {
    const double tt = static_cast<double>(t);
    var -= (tt * tt * tt - tt) / 48.0;
  }
  if (var <= 0.0) return res;
  const double z = (std::abs(res.w_plus - mean) - 0.5) / std::sqrt(var);
  res.p_value = z <= 0.0 ? 1.0 : std::min(1.0, 2.0 * normal_sf(z));
  return res;
}

// Exact two-sided sign test; zero differences dropped.
inline SignedRankResult sign_test(const std::vector<double>& d) {
  if (d.size() < kMinPairs)
    throw InvalidInput("sign test needs at least " + std::to_string(kMinPairs) + " pairs, got " +
                       std::to_string(d.size()));
  SignedRankResult res;
  res.n = d.size();
  std::size_t pos = 0;
  for (double x : d) {
    if (x == 0.0) continue;
    ++res.n_nonzero;
    if (x > 0) ++pos;
  }
  res.w_plus = static_cast<double>(pos);
  const std::size_t n = res.n_nonzero;
  if (n == 0) return res;
  const std::size_t k = std::min(pos, n - pos);
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - static_cast<double>(n) * std::log(2.0));
  res.p_value = std::min(1.0, 2.0 * tail);
  return res;
}

enum class PairedTest { Wilcoxon, Sign };

inline std::string to_string(PairedTest t) { return t == PairedTest::Wilcoxon ? "wilcoxon" : "sign"; }

inline PairedTest paired_test_from_string(const std::string& s) {
  if (s == "wilcoxon") return PairedTest::Wilcoxon;
  if (s == "sign") return PairedTest::Sign;
  throw InvalidInput("unknown paired test '" + s + "' (expected wilcoxon|sign)");
}

struct PairwiseResult {
  std::string label;
  SignedRankResult test;
};

// For every label other than the reference: test of rank(label) - rank(reference)
// paired by response.
inline std::vector<PairwiseResult> pairwise_vs_reference(const std::vector<RankingResponse>& responses,
                                                         const std::string& reference_label = kModelLabels[0],
                                                         PairedTest kind = PairedTest::Wilcoxon) {
  const std::size_t ref = model_index(reference_label);
  for (const auto& r : responses) validate_ranking(r.ranks);
  std::vector<PairwiseResult> out;
  for (std::size_t m = 0; m < kNumModels; ++m) {
    if (m == ref) continue;
    std::vector<double> d;
    for (const auto& r : responses) d.push_back(static_cast<double>(r.ranks[m] - r.ranks[ref]));
    out.push_back({kModelLabels[m], kind == PairedTest::Wilcoxon ? wilcoxon_signed_rank(d) : sign_test(d)});
  }
  return out;
}

// Holm step-down adjustment, returned in input order.
inline std::vector<double> holm_adjust(const std::vector<double>& p) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("holm_adjust: p-value " + std::to_string(v) + " outside [0, 1]");
  const std::size_t m = p.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - j) * p[idx[j]]));
    out[idx[j]] = running;
  }
  return out;
}

// Rounds a percentage to one decimal for reporting.
inline double round1(double v) { return std::round(v * 10.0) / 10.0; }

inline std::string format_percent(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << v;
  return os.str();
}

// Percentage of wrong answers.
inline double fool_rate(const std::vector<SpotResponse>& responses) {
  if (responses.empty()) throw InvalidInput("fool_rate: no responses");
  const auto wrong = std::count_if(responses.begin(), responses.end(), [](const SpotResponse& r) { return !r.correct(); });
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(responses.size());
}

// Percentage of Yes + NotPresent answers among responses to the given structures
// (all structures when the filter is empty).
inline double preservation(const std::vector<AnatomyResponse>& responses, const std::vector<std::size_t>& structures = {}) {
  const std::set<std::size_t> keep(structures.begin(), structures.end());
  std::size_t n = 0, pos = 0;
  for (const auto& r : responses) {
    if (!keep.empty() && !keep.count(r.structure)) continue;
    ++n;
    if (r.answer != AnatomyAnswer::No) ++pos;
  }
  if (n == 0) throw InvalidInput("preservation: no responses match the structure filter");
  return 100.0 * static_cast<double>(pos) / static_cast<double>(n);
}

template <typename Response>
struct Strata {
  std::vector<Response> below;     // years_experience < threshold
  std::vector<Response> at_least;  // years_experience >= threshold
};

template <typename Response>
Strata<Response> stratify(const std::vector<Response>& responses, const std::vector<GraderProfile>& profiles,
                          int threshold_years = 5) {
  std::map<std::string, int> years;
  for (const auto& p : profiles) {
    if (p.years_experience < 0) throw InvalidInput("grader '" + p.grader_id + "' has negative experience");
    if (!years.emplace(p.grader_id, p.years_experience).second)
      throw InvalidInput("duplicate grader profile '" + p.grader_id + "'");
  }
  Strata<Response> out;
  for (const auto& r : responses) {
    const auto it = years.find(r.grader_id);
    if (it == years.end()) throw InvalidInput("no profile for grader '" + r.grader_id + "'");
    (it->second >= threshold_years ? out.at_least : out.below).push_back(r);
  }
  return out;
}

enum class CorrelationKind { Pearson, Spearman };

inline CorrelationKind correlation_kind_from_string(const std::string& s) {
  if (s == "pearson") return CorrelationKind::Pearson;
  if (s == "spearman") return CorrelationKind::Spearman;
  throw InvalidInput("unknown correlation '" + s + "' (expected pearson|spearman)");
}

struct NamedSeries {
  std::string name;
  std::vector<double> values;
};

// Symmetric matrix; entries involving a zero-variance series are NaN and flagged undefined.
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> r;
  std::vector<std::string> undefined;  // names of zero-variance series

  bool defined(std::size_t i, std::size_t j) const { return !std::isnan(r.at(i).at(j)); }
};

// Pearson coefficient; nullopt when either input has zero variance.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidInput("pearson: length mismatch");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline CorrelationMatrix correlation_matrix(const std::vector<NamedSeries>& series,
                                           CorrelationKind kind = CorrelationKind::Pearson) {
  if (series.empty()) throw InvalidInput("correlation_matrix: no series");
  const std::size_t len = series.front().values.size();
  for (const auto& s : series)
    if (s.values.size() != len)
      throw InvalidInput("correlation_matrix: series '" + s.name + "' has length " + std::to_string(s.values.size()) +
                         ", expected " + std::to_string(len));
  if (len < 3) throw InvalidInput("correlation_matrix: need at least 3 observations");
  std::vector<std::vector<double>> data;
  for (const auto& s : series) data.push_back(kind == CorrelationKind::Spearman ? midranks(s.values) : s.values);
  CorrelationMatrix out;
  const std::size_t k = series.size();
  out.r.assign(k, std::vector<double>(k, std::numeric_limits<double>::quiet_NaN()));
  std::vector<bool> flat(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.names.push_back(series[i].name);
    flat[i] = std::all_of(data[i].begin(), data[i].end(), [&](double v) { return v == data[i].front(); });
    if (flat[i]) out.undefined.push_back(series[i].name);
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) {
      if (flat[i] || flat[j]) continue;
      const double v = i == j ? 1.0 : pearson(data[i], data[j]).value_or(std::numeric_limits<double>::quiet_NaN());
      out.r[i][j] = out.r[j][i] = v;
    }
  return out;
}

}  // namespace vitreoforge::stats
