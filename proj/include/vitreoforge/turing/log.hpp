#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "vitreoforge/evalstats.hpp"
#include "vitreoforge/turing/manifest.hpp"

namespace vitreoforge::turing {

// One answered question, one line of the response log.
struct LogRecord {
  std::string timestamp;
  std::string session_id;
  std::string grader_id;
  int years_experience = 0;
  TestKind test_kind = TestKind::Rank6;
  std::string question_id;
  json payload;
  std::string manifest_checksum;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

inline json record_to_json(const LogRecord& r) {
  return {{"timestamp", r.timestamp},
          {"session_id", r.session_id},
          {"grader_id", r.grader_id},
          {"years_experience", r.years_experience},
          {"test_kind", to_string(r.test_kind)},
          {"question_id", r.question_id},
          {"payload", r.payload},
          {"manifest_checksum", r.manifest_checksum}};
}

inline LogRecord record_from_json(const json& j) {
  LogRecord r;
  r.timestamp = j.at("timestamp").get<std::string>();
  r.session_id = j.at("session_id").get<std::string>();
  r.grader_id = j.at("grader_id").get<std::string>();
  r.years_experience = j.at("years_experience").get<int>();
  r.test_kind = test_kind_from_string(j.at("test_kind").get<std::string>());
  r.question_id = j.at("question_id").get<std::string>();
  r.payload = j.at("payload");
  r.manifest_checksum = j.at("manifest_checksum").get<std::string>();
  return r;
}

inline std::vector<LogRecord> parse_log(std::istream& in, const std::string& source = "log") {
  std::vector<LogRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw MalformedInput(source + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const InvalidInput& e) {
      throw MalformedInput(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// A missing file reads as an empty log.
inline std::vector<LogRecord> read_log(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  std::ifstream in(path);
  if (!in) throw IoError("cannot read response log " + path.string());
  return parse_log(in, path.string());
}

// Append-only JSONL writer. Each record is written as a single line and flushed
// before append returns; appends and snapshots are serialized.
class ResponseLog {
 public:
  explicit ResponseLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw IoError("cannot open response log " + path_.string());
  }

  void append(const LogRecord& r) {
    const std::string line = record_to_json(r).dump() + "\n";
    std::lock_guard lock(mu_);
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw IoError("failed appending to " + path_.string());
  }

  std::vector<LogRecord> snapshot() const {
    std::lock_guard lock(mu_);
    return read_log(path_);
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::ofstream out_;
};

inline std::vector<LogRecord> filter_kind(const std::vector<LogRecord>& records, TestKind kind) {
  std::vector<LogRecord> out;
  for (const auto& r : records)
    if (r.test_kind == kind) out.push_back(r);
  return out;
}

// Payload decoders. Malformed payloads raise MalformedInput.

inline std::vector<stats::RankingResponse> ranking_responses(const std::vector<LogRecord>& records) {
  std::vector<stats::RankingResponse> out;
  for (const auto& r : filter_kind(records, TestKind::Rank6)) {
    stats::RankingResponse rr{r.grader_id, r.question_id, {}};
    try {
      const auto& ranks = r.payload.at("ranks");
      for (std::size_t m = 0; m < stats::kNumModels; ++m) rr.ranks[m] = ranks.at(stats::kModelLabels[m]).get<int>();
      stats::validate_ranking(rr.ranks);
    } catch (const std::exception& e) {
      throw MalformedInput("rank6 record " + r.session_id + "/" + r.question_id + ": " + e.what());
    }
    out.push_back(rr);
  }
  return out;
}

inline std::vector<stats::SpotResponse> spot_responses(const std::vector<LogRecord>& records) {
  std::vector<stats::SpotResponse> out;
  for (const auto& r : filter_kind(records, TestKind::Spot)) {
    std::string chosen;
    try {
      chosen = r.payload.at("chosen").get<std::string>();
    } catch (const json::exception& e) {
      throw MalformedInput("spot record " + r.session_id + "/" + r.question_id + ": " + e.what());
    }
    if (chosen != "real" && chosen != "generated")
      throw MalformedInput("spot record " + r.session_id + "/" + r.question_id + ": bad choice '" + chosen + "'");
    out.push_back({r.grader_id, r.question_id, chosen == "real" ? stats::SpotChoice::Real : stats::SpotChoice::Generated});
  }
  return out;
}

inline std::vector<stats::AnatomyResponse> anatomy_responses(const std::vector<LogRecord>& records) {
  std::vector<stats::AnatomyResponse> out;
  for (const auto& r : filter_kind(records, TestKind::Anatomy)) {
    try {
      for (const auto& a : r.payload.at("answers")) {
        stats::AnatomyResponse ar{r.grader_id, r.question_id, a.at("structure").get<std::size_t>(),
                                  stats::anatomy_answer_from_string(a.at("answer").get<std::string>()),
                                  a.value("comment", std::string{})};
        if (ar.structure >= stats::kNumStructures) throw InvalidInput("structure index out of range");
        out.push_back(std::move(ar));
      }
    } catch (const std::exception& e) {
      throw MalformedInput("anatomy record " + r.session_id + "/" + r.question_id + ": " + e.what());
    }
  }
  return out;
}

// Grader profiles as recorded; a grader must report the same experience everywhere.
inline std::vector<stats::GraderProfile> grader_profiles(const std::vector<LogRecord>& records) {
  std::map<std::string, int> years;
  std::vector<stats::GraderProfile> out;
  for (const auto& r : records) {
    const auto [it, inserted] = years.emplace(r.grader_id, r.years_experience);
    if (inserted) {
      out.push_back({r.grader_id, r.years_experience});
    } else if (it->second != r.years_experience) {
      throw MalformedInput("grader '" + r.grader_id + "' recorded with conflicting experience");
    }
  }
  return out;
}

}  // namespace vitreoforge::turing
