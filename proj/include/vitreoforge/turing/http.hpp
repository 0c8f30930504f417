#pragma once

#include <functional>
#include <string>

#include "vitreoforge/turing/service.hpp"

#include <httplib.h>
#include <json.hpp>

namespace vitreoforge::turing {

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Maps library errors onto HTTP status codes with a {"error": ...} body.
inline void guarded(httplib::Response& res, const std::function<json()>& fn, int ok_status = 200) {
  try {
    send_json(res, ok_status, fn());
  } catch (const UnknownSession& e) {
    send_json(res, 404, {{"error", e.what()}, {"kind", "unknown_session"}});
  } catch (const NoData& e) {
    send_json(res, 404, {{"error", e.what()}, {"kind", "no_data"}});
  } catch (const OutOfOrder& e) {
    send_json(res, 409, {{"error", e.what()}, {"kind", "out_of_order"}});
  } catch (const Mismatch& e) {
    send_json(res, 409, {{"error", e.what()}, {"kind", "manifest_mismatch"}});
  } catch (const InvalidInput& e) {
    send_json(res, 400, {{"error", e.what()}, {"kind", "validation"}});
  } catch (const json::exception& e) {
    send_json(res, 400, {{"error", std::string("malformed JSON body: ") + e.what()}, {"kind", "validation"}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", e.what()}, {"kind", "internal"}});
  }
}

}  // namespace detail

// Registers the /v1 API on an httplib server.
inline void mount(httplib::Server& server, Service& svc) {
  server.Post("/v1/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] { return svc.start_session(json::parse(req.body)); }, 201);
  });
  server.Get(R"(/v1/sessions/([^/]+)/question)", [&svc](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] { return svc.get_question(req.matches[1]); });
  });
  server.Post(R"(/v1/sessions/([^/]+)/answers)", [&svc](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] { return svc.submit_answer(req.matches[1], json::parse(req.body)); });
  });
  server.Get(R"(/v1/results/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] { return svc.results(req.matches[1]); });
  });
  server.Get(R"(/v1/images/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto png = svc.image_png(req.matches[1]);
      if (!png) {
        detail::send_json(res, 404, {{"error", "unknown image token"}, {"kind", "not_found"}});
        return;
      }
      res.set_content(reinterpret_cast<const char*>(png->data()), png->size(), "image/png");
    } catch (const std::exception& e) {
      detail::send_json(res, 500, {{"error", e.what()}, {"kind", "internal"}});
    }
  });
  server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    detail::send_json(res, 200, {{"status", "ok"}});
  });
}

}  // namespace vitreoforge::turing
