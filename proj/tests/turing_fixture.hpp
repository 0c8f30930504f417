#pragma once

// Synthetic image sets and simulated graders for exercising the Turing service.

#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vitreoforge/image_io.hpp"
#include "vitreoforge/turing/http.hpp"

namespace fixture {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vitreoforge;
using namespace vitreoforge::turing;

inline fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("vitreoforge_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Tiny float-raw images for every role at each location.
inline std::vector<LocationImages> write_locations(const fs::path& dir, std::size_t n) {
  std::vector<LocationImages> out;
  for (std::size_t i = 0; i < n; ++i) {
    LocationImages loc;
    loc.location = "location_" + std::to_string(i);
    const fs::path ld = dir / loc.location;
    fs::create_directories(ld);
    auto put = [&](const std::string& name, double v) {
      ImageTensor img(8, 8, v);
      img(i % 8, 0) = 1.0;
      const fs::path p = ld / (name + ".octf");
      save_image(img, p);
      return p.string();
    };
    loc.art10 = put("art10", 0.2);
    loc.target = put("target", 0.5);
    for (std::size_t m = 1; m < stats::kNumModels; ++m) loc.outputs[stats::kModelLabels[m]] = put(stats::kModelLabels[m], 0.1 * m);
    out.push_back(loc);
  }
  return out;
}

inline std::vector<QuestionManifest> make_manifests(const std::vector<LocationImages>& locs, std::size_t questions,
                                                    std::uint64_t seed) {
  std::vector<QuestionManifest> out;
  for (TestKind k : {TestKind::Rank6, TestKind::Spot, TestKind::Anatomy})
    out.push_back(create_manifest(locs, {k, questions, seed + static_cast<std::uint64_t>(k), "cDDPM"}));
  return out;
}

// Runs an httplib server on an ephemeral port for the lifetime of the object.
class ServerThread {
 public:
  explicit ServerThread(Service& svc) {
    mount(server_, svc);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    while (!server_.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  ~ServerThread() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

struct Grader {
  std::string id;
  int years;
};

inline std::vector<Grader> seven_graders() {
  return {{"grader-a", 2}, {"grader-b", 3}, {"grader-c", 5}, {"grader-d", 7},
          {"grader-e", 10}, {"grader-f", 14}, {"grader-g", 25}};
}

inline json post(httplib::Client& cli, const std::string& path, const json& body, int expect) {
  auto res = cli.Post(path, body.dump(), "application/json");
  if (!res) throw std::runtime_error("POST " + path + " failed: " + httplib::to_string(res.error()));
  if (res->status != expect)
    throw std::runtime_error("POST " + path + " returned " + std::to_string(res->status) + ": " + res->body);
  return json::parse(res->body);
}

inline json get(httplib::Client& cli, const std::string& path, int expect = 200) {
  auto res = cli.Get(path);
  if (!res) throw std::runtime_error("GET " + path + " failed: " + httplib::to_string(res.error()));
  if (res->status != expect)
    throw std::runtime_error("GET " + path + " returned " + std::to_string(res->status) + ": " + res->body);
  return json::parse(res->body);
}

// Plays one full session over HTTP with seeded random answers. Spot answers use the
// manifest key to pick the real image with probability 0.65.
inline void play_session(httplib::Client& cli, const Grader& g, TestKind kind, const QuestionManifest& m,
                         std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const json s = post(cli, "/v1/sessions", {{"grader_id", g.id}, {"years_experience", g.years}, {"test_kind", to_string(kind)}}, 201);
  const std::string sid = s.at("session_id");
  for (;;) {
    const json q = get(cli, "/v1/sessions/" + sid + "/question");
    if (q.at("done").get<bool>()) break;
    const std::size_t idx = q.at("index");
    json answer{{"question_id", q.at("question_id")}};
    switch (kind) {
      case TestKind::Rank6: {
        std::vector<int> r{1, 2, 3, 4, 5, 6};
        std::shuffle(r.begin(), r.end(), rng);
        answer["ranks"] = r;
        break;
      }
      case TestKind::Spot: {
        std::bernoulli_distribution right(0.65);
        const std::size_t real = m.question(idx).correct;
        answer["choice"] = right(rng) ? real : 1 - real;
        break;
      }
      case TestKind::Anatomy: {
        static const char* kAns[] = {"Yes", "Yes", "Yes", "No", "NotPresent"};
        std::uniform_int_distribution<int> pick(0, 4);
        json a = json::array();
        for (std::size_t i = 0; i < stats::kNumStructures; ++i) a.push_back({{"structure", i}, {"answer", kAns[pick(rng)]}});
        answer["answers"] = a;
        break;
      }
    }
    post(cli, "/v1/sessions/" + sid + "/answers", answer, 200);
  }
}

}  // namespace fixture
