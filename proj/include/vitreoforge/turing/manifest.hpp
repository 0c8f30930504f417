#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vitreoforge/error.hpp"
#include "vitreoforge/evalstats.hpp"
#include "vitreoforge/rng.hpp"

namespace vitreoforge::turing {

using nlohmann::json;

enum class TestKind { Rank6, Spot, Anatomy };

inline std::string to_string(TestKind k) {
  switch (k) {
    case TestKind::Rank6: return "rank6";
    case TestKind::Spot: return "spot";
    case TestKind::Anatomy: return "anatomy";
  }
  return "?";
}

inline TestKind test_kind_from_string(const std::string& s) {
  if (s == "rank6") return TestKind::Rank6;
  if (s == "spot") return TestKind::Spot;
  if (s == "anatomy") return TestKind::Anatomy;
  throw InvalidInput("unknown test kind '" + s + "' (expected rank6|spot|anatomy)");
}

// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct ManifestImage {
  std::string token;
  std::string path;
  std::string label;  // model label, "real"/"generated", or "reference"; never sent for rank6/spot
};

struct Question {
  std::string id;
  std::string location;
  std::optional<ManifestImage> reference;  // rank6 only: the ART10 input
  std::vector<ManifestImage> images;       // display order
  std::size_t correct = 0;                 // spot only: slot of the real image
};

struct QuestionManifest {
  TestKind kind = TestKind::Rank6;
  std::uint64_t seed = 0;
  std::vector<Question> questions;
  std::string checksum;

  const Question& question(std::size_t i) const { return questions.at(i); }
};

// Images available at one acquisition location. outputs maps a model label to a path;
// "signal-averaging" falls back to target when absent.
struct LocationImages {
  std::string location;
  std::string art10;
  std::string target;
  std::map<std::string, std::string> outputs;
};

struct ManifestOptions {
  TestKind kind = TestKind::Rank6;
  std::size_t questions = 10;
  std::uint64_t seed = 0;
  std::string generated_model = "cDDPM";  // model shown in spot and anatomy questions
};

namespace detail {

inline json image_json(const ManifestImage& im) { return {{"token", im.token}, {"path", im.path}, {"label", im.label}}; }

inline ManifestImage image_from_json(const json& j) {
  return {j.at("token").get<std::string>(), j.at("path").get<std::string>(), j.at("label").get<std::string>()};
}

// Everything except the checksum itself; key order is canonical (sorted).
inline json manifest_body(const QuestionManifest& m) {
  json qs = json::array();
  for (const auto& q : m.questions) {
    json jq{{"id", q.id}, {"location", q.location}, {"correct", q.correct}};
    jq["reference"] = q.reference ? image_json(*q.reference) : json(nullptr);
    json imgs = json::array();
    for (const auto& im : q.images) imgs.push_back(image_json(im));
    jq["images"] = imgs;
    qs.push_back(jq);
  }
  return {{"test_kind", to_string(m.kind)}, {"seed", m.seed}, {"questions", qs}};
}

inline const std::string& output_path(const LocationImages& loc, const std::string& label) {
  const auto it = loc.outputs.find(label);
  if (it != loc.outputs.end()) return it->second;
  if (label == stats::kModelLabels[0] && !loc.target.empty()) return loc.target;
  throw InvalidInput("insufficient images: location '" + loc.location + "' has no " + label + " output");
}

inline std::string two_digits(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "q%02zu", i + 1);
  return buf;
}

}  // namespace detail

inline std::string compute_checksum(const QuestionManifest& m) { return fnv1a_hex(detail::manifest_body(m).dump()); }

// Picks one location per question, reusing a location at most once and only after
// every location has been used.
inline std::vector<std::size_t> pick_locations(std::size_t n_locations, std::size_t n_questions, Rng& rng) {
  if (n_locations == 0) throw InvalidInput("insufficient images: no locations");
  if (n_questions > 2 * n_locations)
    throw InvalidInput("insufficient images: " + std::to_string(n_questions) + " questions need at least " +
                       std::to_string((n_questions + 1) / 2) + " locations, got " + std::to_string(n_locations));
  std::vector<std::size_t> first(n_locations);
  for (std::size_t i = 0; i < n_locations; ++i) first[i] = i;
  std::shuffle(first.begin(), first.end(), rng);
  std::vector<std::size_t> second = first;
  std::shuffle(second.begin(), second.end(), rng);
  std::vector<std::size_t> picks;
  for (std::size_t q = 0; q < n_questions; ++q) picks.push_back(q < n_locations ? first[q] : second[q - n_locations]);
  return picks;
}

inline QuestionManifest create_manifest(const std::vector<LocationImages>& locations, const ManifestOptions& opt) {
  if (opt.questions == 0) throw InvalidInput("manifest: need at least one question");
  Rng rng = make_rng(opt.seed);
  const auto picks = pick_locations(locations.size(), opt.questions, rng);
  QuestionManifest m;
  m.kind = opt.kind;
  m.seed = opt.seed;
  const std::string kind = to_string(opt.kind);
  for (std::size_t q = 0; q < picks.size(); ++q) {
    const LocationImages& loc = locations[picks[q]];
    Question qu;
    qu.id = detail::two_digits(q);
    qu.location = loc.location;
    const std::string prefix = kind + "-" + qu.id + "-";
    if (loc.target.empty()) throw InvalidInput("insufficient images: location '" + loc.location + "' has no target");
    switch (opt.kind) {
      case TestKind::Rank6: {
        if (loc.art10.empty()) throw InvalidInput("insufficient images: location '" + loc.location + "' has no ART10");
        qu.reference = ManifestImage{prefix + "ref", loc.art10, "reference"};
        std::vector<std::size_t> order(stats::kNumModels);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t slot = 0; slot < order.size(); ++slot) {
          const std::string label = stats::kModelLabels[order[slot]];
          qu.images.push_back({prefix + std::to_string(slot), detail::output_path(loc, label), label});
        }
        break;
      }
      case TestKind::Spot: {
        const std::string& gen = detail::output_path(loc, opt.generated_model);
        std::uniform_int_distribution<int> coin(0, 1);
        qu.correct = static_cast<std::size_t>(coin(rng));
        qu.images.resize(2);
        qu.images[qu.correct] = {prefix + std::to_string(qu.correct), loc.target, "real"};
        qu.images[1 - qu.correct] = {prefix + std::to_string(1 - qu.correct), gen, "generated"};
        break;
      }
      case TestKind::Anatomy: {
        qu.images = {{prefix + "0", loc.target, "real"},
                     {prefix + "1", detail::output_path(loc, opt.generated_model), "generated"}};
        break;
      }
    }
    m.questions.push_back(std::move(qu));
  }
  m.checksum = compute_checksum(m);
  return m;
}

inline json manifest_to_json(const QuestionManifest& m) {
  json j = detail::manifest_body(m);
  j["checksum"] = m.checksum;
  return j;
}

// Parses and verifies the stored checksum.
inline QuestionManifest manifest_from_json(const json& j) {
  QuestionManifest m;
  try {
    m.kind = test_kind_from_string(j.at("test_kind").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& jq : j.at("questions")) {
      Question q;
      q.id = jq.at("id").get<std::string>();
      q.location = jq.at("location").get<std::string>();
      q.correct = jq.at("correct").get<std::size_t>();
      if (!jq.at("reference").is_null()) q.reference = detail::image_from_json(jq.at("reference"));
      for (const auto& im : jq.at("images")) q.images.push_back(detail::image_from_json(im));
      m.questions.push_back(std::move(q));
    }
    m.checksum = j.at("checksum").get<std::string>();
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("manifest: ") + e.what());
  }
  for (const auto& q : m.questions) {
    const std::size_t want = m.kind == TestKind::Rank6 ? stats::kNumModels : 2;
    if (q.images.size() != want)
      throw MalformedInput("manifest: question " + q.id + " has " + std::to_string(q.images.size()) + " images");
    if (m.kind == TestKind::Rank6 && !q.reference) throw MalformedInput("manifest: question " + q.id + " lacks ART10");
    if (m.kind == TestKind::Spot && (q.correct > 1 || q.images[q.correct].label != "real"))
      throw MalformedInput("manifest: question " + q.id + " has an inconsistent answer key");
  }
  const std::string actual = compute_checksum(m);
  if (actual != m.checksum)
    throw Mismatch("manifest checksum " + m.checksum + " does not match contents (" + actual + ")");
  return m;
}

inline void save_manifest(const QuestionManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

inline QuestionManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw MalformedInput(path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace vitreoforge::turing
