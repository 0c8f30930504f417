#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vitreoforge/evalstats.hpp"
#include "vitreoforge/turing/log.hpp"

namespace vitreoforge::turing {

struct ResultsConfig {
  stats::BootstrapConfig bootstrap;
  stats::PairedTest test = stats::PairedTest::Wilcoxon;
  std::string reference_label = stats::kModelLabels[0];
  double alpha = 0.05;
  int threshold_years = 5;
};

namespace detail {

inline json mean_rank_json(const std::vector<stats::RankingResponse>& rs, const ResultsConfig& cfg) {
  json out = json::array();
  for (const auto& m : stats::mean_rank(rs, cfg.bootstrap))
    out.push_back({{"label", m.label}, {"mean", m.mean}, {"ci_low", m.ci_low}, {"ci_high", m.ci_high}});
  return out;
}

// null when there are too few paired observations for the test.
inline json pairwise_json(const std::vector<stats::RankingResponse>& rs, const ResultsConfig& cfg) {
  if (rs.size() < stats::kMinPairs) return nullptr;
  const auto res = stats::pairwise_vs_reference(rs, cfg.reference_label, cfg.test);
  std::vector<double> p;
  for (const auto& r : res) p.push_back(r.test.p_value);
  const auto adj = stats::holm_adjust(p);
  json out = json::array();
  for (std::size_t i = 0; i < res.size(); ++i)
    out.push_back({{"label", res[i].label},
                   {"n", res[i].test.n},
                   {"n_nonzero", res[i].test.n_nonzero},
                   {"statistic", res[i].test.w_plus},
                   {"p", res[i].test.p_value},
                   {"p_holm", adj[i]},
                   {"significant", adj[i] < cfg.alpha}});
  return out;
}

inline json percent(double v) { return {{"value", v}, {"display", stats::format_percent(v)}}; }

inline json rank6_block(const std::vector<stats::RankingResponse>& rs, const ResultsConfig& cfg) {
  if (rs.empty()) return nullptr;
  return {{"n_responses", rs.size()}, {"mean_rank", mean_rank_json(rs, cfg)}, {"pairwise", pairwise_json(rs, cfg)}};
}

inline json spot_block(const std::vector<stats::SpotResponse>& rs) {
  if (rs.empty()) return nullptr;
  return {{"n_responses", rs.size()}, {"fool_rate", percent(stats::fool_rate(rs))}};
}

inline json anatomy_block(const std::vector<stats::AnatomyResponse>& rs) {
  if (rs.empty()) return nullptr;
  auto maybe = [&](const std::vector<std::size_t>& filter) -> json {
    std::set<std::size_t> keep(filter.begin(), filter.end());
    for (const auto& r : rs)
      if (keep.count(r.structure)) return percent(stats::preservation(rs, filter));
    return nullptr;
  };
  json per = json::array();
  for (std::size_t s = 0; s < stats::kNumStructures; ++s) {
    std::size_t n = 0;
    for (const auto& r : rs) n += r.structure == s;
    per.push_back({{"structure", s}, {"name", stats::kStructureNames[s]}, {"n", n}, {"preservation", maybe({s})}});
  }
  return {{"n_responses", rs.size()},
          {"overall", percent(stats::preservation(rs))},
          {"vitreous", maybe(stats::vitreous_structures())},
          {"other", maybe(stats::other_structures())},
          {"per_structure", per}};
}

template <typename R, typename Block>
json stratified(const std::vector<R>& rs, const std::vector<stats::GraderProfile>& profiles, int threshold,
                Block block) {
  const auto s = stats::stratify(rs, profiles, threshold);
  return {{"threshold_years", threshold}, {"below", block(s.below)}, {"at_least", block(s.at_least)}};
}

inline std::size_t count_graders(const std::vector<LogRecord>& records) {
  std::set<std::string> g;
  for (const auto& r : records) g.insert(r.grader_id);
  return g.size();
}

}  // namespace detail

// Statistics document for one test kind, recomputed from log records alone.
inline json results_document(TestKind kind, const std::vector<LogRecord>& all, const ResultsConfig& cfg = {}) {
  const auto records = filter_kind(all, kind);
  if (records.empty()) throw NoData("no responses recorded for " + to_string(kind));
  const auto profiles = grader_profiles(records);
  json doc{{"test_kind", to_string(kind)}, {"n_records", records.size()}, {"n_graders", detail::count_graders(records)}};
  switch (kind) {
    case TestKind::Rank6: {
      const auto rs = ranking_responses(records);
      auto block = [&](const std::vector<stats::RankingResponse>& v) { return detail::rank6_block(v, cfg); };
      doc["reference"] = cfg.reference_label;
      doc["test"] = stats::to_string(cfg.test);
      doc["bootstrap"] = {{"resamples", cfg.bootstrap.resamples}, {"level", cfg.bootstrap.level},
                          {"seed", cfg.bootstrap.seed}};
      doc["all"] = block(rs);
      doc["strata"] = detail::stratified(rs, profiles, cfg.threshold_years, block);
      break;
    }
    case TestKind::Spot: {
      const auto rs = spot_responses(records);
      doc["all"] = detail::spot_block(rs);
      doc["strata"] = detail::stratified(rs, profiles, cfg.threshold_years, detail::spot_block);
      break;
    }
    case TestKind::Anatomy: {
      const auto rs = anatomy_responses(records);
      doc["all"] = detail::anatomy_block(rs);
      doc["strata"] = detail::stratified(rs, profiles, cfg.threshold_years, detail::anatomy_block);
      break;
    }
  }
  return doc;
}

}  // namespace vitreoforge::turing
