#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vitreoforge/image.hpp"
#include "vitreoforge/image_io.hpp"
#include "vitreoforge/turing/log.hpp"
#include "vitreoforge/turing/manifest.hpp"
#include "vitreoforge/turing/results.hpp"

namespace vitreoforge::turing {

class UnknownSession : public Error {
 public:
  using Error::Error;
};

// Resubmission of an answered question or an answer for a later question.
class OutOfOrder : public Error {
 public:
  using Error::Error;
};

struct Session {
  std::string id;
  std::string grader_id;
  int years_experience = 0;
  TestKind kind = TestKind::Rank6;
  std::string manifest_checksum;
  std::size_t cursor = 0;
  std::string created;
};

// Transport-independent core of the Turing-test service. Holds the read-only
// manifests, the session table and the response log; statistics are always
// recomputed from the log.
class Service {
 public:
  Service(std::vector<QuestionManifest> manifests, const std::filesystem::path& log_path, ResultsConfig results = {},
          std::uint64_t session_seed = std::random_device{}())
      : log_(log_path), results_cfg_(std::move(results)), id_rng_(make_rng(session_seed)) {
    for (auto& m : manifests) {
      if (m.questions.empty()) throw InvalidInput("manifest for " + to_string(m.kind) + " has no questions");
      if (compute_checksum(m) != m.checksum) throw Mismatch("manifest for " + to_string(m.kind) + " fails its checksum");
      for (const auto& q : m.questions) {
        if (q.reference) tokens_[q.reference->token] = q.reference->path;
        for (const auto& im : q.images) tokens_[im.token] = im.path;
      }
      const TestKind k = m.kind;
      if (!manifests_.emplace(k, std::move(m)).second)
        throw InvalidInput("two manifests for test kind " + to_string(k));
    }
    restore_sessions();
  }

  const std::filesystem::path& log_path() const noexcept { return log_.path(); }
  const ResultsConfig& results_config() const noexcept { return results_cfg_; }

  // body: {grader_id, years_experience, test_kind}
  json start_session(const json& body) {
    const std::string grader = require_string(body, "grader_id");
    if (grader.empty()) throw InvalidInput("grader_id must not be empty");
    const int years = require_int(body, "years_experience");
    if (years < 0) throw InvalidInput("years_experience must be >= 0");
    const TestKind kind = test_kind_from_string(require_string(body, "test_kind"));
    const QuestionManifest& m = manifest(kind);
    std::lock_guard lock(mu_);
    const auto known = grader_years_.find(grader);
    if (known != grader_years_.end() && known->second != years)
      throw InvalidInput("grader '" + grader + "' already registered with " + std::to_string(known->second) +
                         " years of experience");
    Session s;
    do {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
      s.id = buf;
    } while (sessions_.count(s.id));
    s.grader_id = grader;
    s.years_experience = years;
    s.kind = kind;
    s.manifest_checksum = m.checksum;
    s.created = utc_timestamp();
    grader_years_[grader] = years;
    sessions_[s.id] = s;
    return session_json(s, m);
  }

  json get_question(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    const Session& s = session(session_id);
    const QuestionManifest& m = bound_manifest(s);
    json out{{"session_id", s.id}, {"test_kind", to_string(s.kind)}, {"index", s.cursor}, {"count", m.questions.size()}};
    if (s.cursor >= m.questions.size()) {
      out["done"] = true;
      return out;
    }
    const Question& q = m.question(s.cursor);
    out["done"] = false;
    out["question_id"] = q.id;
    json images = json::array();
    for (std::size_t slot = 0; slot < q.images.size(); ++slot) {
      json im{{"slot", slot}, {"url", image_url(q.images[slot].token)}};
      if (s.kind == TestKind::Anatomy) im["role"] = q.images[slot].label == "real" ? "pseudoART100" : "generated";
      images.push_back(im);
    }
    out["images"] = images;
    switch (s.kind) {
      case TestKind::Rank6:
        out["reference"] = {{"url", image_url(q.reference->token)}};
        out["answer_format"] = "{\"ranks\": [rank for slot 0..5]}, a permutation of 1..6 with 1 = best";
        break;
      case TestKind::Spot:
        out["answer_format"] = "{\"choice\": chosen slot, 0 or 1}";
        break;
      case TestKind::Anatomy: {
        json st = json::array();
        for (std::size_t i = 0; i < stats::kNumStructures; ++i)
          st.push_back({{"structure", i},
                        {"name", stats::kStructureNames[i]},
                        {"group", i < stats::kNumVitreousStructures ? "vitreous" : "other"}});
        out["structures"] = st;
        out["answer_format"] =
            "{\"answers\": [{\"structure\": i, \"answer\": \"Yes|No|NotPresent\", \"comment\": optional}] for all 9}";
        break;
      }
    }
    return out;
  }

  // Validates, appends one log record, then advances the cursor. A rejected answer
  // leaves both the log and the cursor untouched.
  json submit_answer(const std::string& session_id, const json& body) {
    std::lock_guard lock(mu_);
    Session& s = session(session_id);
    const QuestionManifest& m = bound_manifest(s);
    if (s.cursor >= m.questions.size()) throw OutOfOrder("session " + s.id + " has already answered every question");
    const Question& q = m.question(s.cursor);
    if (body.contains("question_id")) {
      const std::string qid = require_string(body, "question_id");
      if (qid != q.id) {
        bool earlier = false;
        for (std::size_t i = 0; i < s.cursor; ++i) earlier |= m.questions[i].id == qid;
        throw OutOfOrder(earlier ? "question " + qid + " was already answered in session " + s.id
                                 : "question " + qid + " is not the current question (" + q.id + ")");
      }
    }
    LogRecord rec;
    rec.timestamp = utc_timestamp();
    rec.session_id = s.id;
    rec.grader_id = s.grader_id;
    rec.years_experience = s.years_experience;
    rec.test_kind = s.kind;
    rec.question_id = q.id;
    rec.payload = validate_payload(s.kind, q, body);
    rec.manifest_checksum = s.manifest_checksum;
    log_.append(rec);
    ++s.cursor;
    return {{"accepted", true},
            {"question_id", q.id},
            {"next_index", s.cursor},
            {"done", s.cursor >= m.questions.size()}};
  }

  json results(const std::string& kind) const { return results_document(test_kind_from_string(kind), log_.snapshot(), results_cfg_); }

  // 8-bit PNG rendering of the image behind a token; nullopt for unknown tokens.
  std::optional<std::vector<std::uint8_t>> image_png(const std::string& token) const {
    const auto it = tokens_.find(token);
    if (it == tokens_.end()) return std::nullopt;
    std::lock_guard lock(cache_mu_);
    auto c = png_cache_.find(token);
    if (c == png_cache_.end()) c = png_cache_.emplace(token, encode_png(clamp_unit(load_image(it->second)))).first;
    return c->second;
  }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  static std::string image_url(const std::string& token) { return "/v1/images/" + token; }

  static std::string require_string(const json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || !body.at(key).is_string())
      throw InvalidInput(std::string("field '") + key + "' must be a string");
    return body.at(key).get<std::string>();
  }

  static int require_int(const json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || !body.at(key).is_number_integer())
      throw InvalidInput(std::string("field '") + key + "' must be an integer");
    return body.at(key).get<int>();
  }

  static json validate_payload(TestKind kind, const Question& q, const json& body) {
    if (!body.is_object()) throw InvalidInput("answer must be an object");
    switch (kind) {
      case TestKind::Rank6: {
        const json& r = body.contains("ranks") ? body.at("ranks") : json();
        if (!r.is_array() || r.size() != stats::kNumModels)
          throw InvalidInput("'ranks' must be an array of 6 integers");
        stats::Ranking slot_ranks{};
        for (std::size_t i = 0; i < stats::kNumModels; ++i) {
          if (!r[i].is_number_integer()) throw InvalidInput("'ranks' must be an array of 6 integers");
          slot_ranks[i] = r[i].get<int>();
        }
        stats::validate_ranking(slot_ranks);
        json by_label = json::object();
        for (std::size_t i = 0; i < stats::kNumModels; ++i) by_label[q.images[i].label] = slot_ranks[i];
        return {{"ranks", by_label}, {"slot_ranks", r}};
      }
      case TestKind::Spot: {
        if (!body.contains("choice") || !body.at("choice").is_number_integer())
          throw InvalidInput("'choice' must be the chosen slot, 0 or 1");
        const auto c = body.at("choice").get<long long>();
        if (c != 0 && c != 1) throw InvalidInput("'choice' must be 0 or 1");
        const auto slot = static_cast<std::size_t>(c);
        return {{"slot", slot}, {"chosen", q.images[slot].label}, {"correct", slot == q.correct}};
      }
      case TestKind::Anatomy: {
        const json& a = body.contains("answers") ? body.at("answers") : json();
        if (!a.is_array() || a.size() != stats::kNumStructures)
          throw InvalidInput("'answers' must hold one entry for each of the 9 structures");
        std::vector<json> sorted(stats::kNumStructures);
        for (const auto& e : a) {
          if (!e.is_object() || !e.contains("structure") || !e.at("structure").is_number_integer())
            throw InvalidInput("each answer needs an integer 'structure'");
          const auto si = e.at("structure").get<long long>();
          if (si < 0 || si >= static_cast<long long>(stats::kNumStructures))
            throw InvalidInput("structure index " + std::to_string(si) + " out of range");
          const auto s = static_cast<std::size_t>(si);
          if (!sorted[s].is_null()) throw InvalidInput("structure " + std::to_string(s) + " answered twice");
          if (!e.contains("answer") || !e.at("answer").is_string()) throw InvalidInput("each answer needs 'answer'");
          const auto ans = stats::anatomy_answer_from_string(e.at("answer").get<std::string>());
          std::string comment;
          if (e.contains("comment")) {
            if (!e.at("comment").is_string()) throw InvalidInput("'comment' must be a string");
            comment = e.at("comment").get<std::string>();
          }
          sorted[s] = {{"structure", s}, {"answer", stats::to_string(ans)}, {"comment", comment}};
        }
        return {{"answers", sorted}};
      }
    }
    throw InvalidInput("bad test kind");
  }

  const QuestionManifest& manifest(TestKind k) const {
    const auto it = manifests_.find(k);
    if (it == manifests_.end()) throw InvalidInput("no manifest loaded for test kind " + to_string(k));
    return it->second;
  }

  const QuestionManifest& bound_manifest(const Session& s) const {
    const QuestionManifest& m = manifest(s.kind);
    if (m.checksum != s.manifest_checksum)
      throw Mismatch("session " + s.id + " is bound to manifest " + s.manifest_checksum + " but the service runs " +
                     m.checksum);
    return m;
  }

  Session& session(const std::string& id) {
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession("unknown session '" + id + "'");
    return it->second;
  }
  const Session& session(const std::string& id) const { return const_cast<Service*>(this)->session(id); }

  json session_json(const Session& s, const QuestionManifest& m) const {
    return {{"session_id", s.id},
            {"grader_id", s.grader_id},
            {"years_experience", s.years_experience},
            {"test_kind", to_string(s.kind)},
            {"question_count", m.questions.size()},
            {"cursor", s.cursor},
            {"manifest_checksum", s.manifest_checksum},
            {"created", s.created}};
  }

  // Sessions with at least one answer survive a restart; the cursor is the answer count.
  void restore_sessions() {
    for (const auto& r : log_.snapshot()) {
      auto [it, inserted] = sessions_.try_emplace(r.session_id);
      Session& s = it->second;
      if (inserted) {
        s.id = r.session_id;
        s.grader_id = r.grader_id;
        s.years_experience = r.years_experience;
        s.kind = r.test_kind;
        s.manifest_checksum = r.manifest_checksum;
        s.created = r.timestamp;
      }
      ++s.cursor;
      grader_years_.emplace(r.grader_id, r.years_experience);
    }
  }

  std::map<TestKind, QuestionManifest> manifests_;
  std::map<std::string, std::string> tokens_;
  ResponseLog log_;
  ResultsConfig results_cfg_;
  mutable std::mutex mu_;
  Rng id_rng_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, int> grader_years_;
  mutable std::mutex cache_mu_;
  mutable std::map<std::string, std::vector<std::uint8_t>> png_cache_;
};

}  // namespace vitreoforge::turing
