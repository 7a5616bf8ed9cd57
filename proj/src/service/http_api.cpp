#include "hc/service/http_api.hpp"

#include <atomic>
#include <condition_variable>
#include <functional>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "hc/rehab/session_log.hpp"

namespace hc::service {

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& detail) {
  send_json(res, status, {{"error", {{"code", code}, {"detail", detail}}}});
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) throw ServiceError("BadRequest", 400, "request body is empty");
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ServiceError("BadRequest", 400, std::string("body is not JSON: ") + e.what());
  }
}

nlohmann::json events_json(const std::vector<rehab::FeedbackEvent>& events) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : events) arr.push_back(rehab::feedback_to_json(e));
  return {{"events", std::move(arr)}};
}

// Shared error mapping and token check around every handler.
Handler guarded(const HttpOptions& options, Handler inner) {
  return [token = options.api_token, inner = std::move(inner)](const httplib::Request& req,
                                                               httplib::Response& res) {
    if (!token.empty() && req.get_header_value("X-API-Token") != token) {
      send_error(res, 401, "Unauthorized", "missing or wrong X-API-Token");
      return;
    }
    try {
      inner(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const features::FrameStreamError& e) {
      send_error(res, 400, "MalformedFrame", e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

CreateSessionRequest session_request_from_json(const nlohmann::json& j) {
  CreateSessionRequest r;
  r.patient_id = j.at("patient_id").get<std::string>();
  r.mode = rehab::mode_from_string(j.value("mode", std::string("basic")));
  if (r.mode == rehab::Mode::Basic) {
    r.exercise_ids = j.at("exercise_ids").get<std::vector<std::string>>();
  } else {
    r.duration_ms = j.at("duration_ms").get<std::int64_t>();
    r.difficulty = rehab::difficulty_from_string(j.value("difficulty", std::string("hard")));
    r.seed = j.value("seed", std::uint64_t{0});
  }
  return r;
}

DetectResult detect_from_json(const SessionService& service, const nlohmann::json& j) {
  if (j.contains("features")) {
    std::vector<Eigen::VectorXd> feats;
    for (const auto& row : j.at("features")) {
      const auto values = row.get<std::vector<double>>();
      feats.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    return service.detect_features(feats);
  }
  if (j.contains("frames")) {
    std::vector<features::AUFrame> frames;
    features::FrameStreamChecker checker;
    std::size_t n = 0;
    for (const auto& rec : j.at("frames")) {
      frames.push_back(features::frame_from_json(rec, ++n));
      checker.check(frames.back(), n);
    }
    return service.detect_frames(frames);
  }
  throw ServiceError("MalformedUpload", 400, "upload needs 'frames' or 'features'");
}

}  // namespace

void install_routes(httplib::Server& server, SessionService& service, const HttpOptions& options) {
  auto get = [&](const char* pattern, Handler h) { server.Get(pattern, guarded(options, std::move(h))); };
  auto post = [&](const char* pattern, Handler h) { server.Post(pattern, guarded(options, std::move(h))); };

  // Frames are small and posted one per request; Nagle plus delayed ACK would
  // add tens of milliseconds to each.
  server.set_tcp_nodelay(true);
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type, X-API-Token"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  // Liveness probe; no token.
  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  post("/patients", [&service](const auto& req, auto& res) {
    const auto j = req.body.empty() ? nlohmann::json::object() : parse_body(req);
    const auto rec = service.create_patient(j.value("patient_id", std::string()),
                                            j.value("alias", std::string()));
    send_json(res, 201, {{"patient_id", rec.patient_id},
                         {"alias", rec.alias},
                         {"created_at", rec.created_at_ms}});
  });

  get("/exercises", [&service](const auto&, auto& res) {
    send_json(res, 200, service.catalog().to_json());
  });

  post("/sessions", [&service](const auto& req, auto& res) {
    const auto desc = service.create_session(session_request_from_json(parse_body(req)));
    send_json(res, 201, descriptor_to_json(desc));
  });

  get(R"(/sessions/([^/]+))", [&service](const auto& req, auto& res) {
    send_json(res, 200, descriptor_to_json(service.describe(req.matches[1])));
  });

  post(R"(/sessions/([^/]+)/baseline/start)",
        [&service](const auto& req, auto& res) {
          send_json(res, 200, events_json(service.start_baseline(req.matches[1])));
        });

  post(R"(/sessions/([^/]+)/frames)", [&service](const auto& req, auto& res) {
    const auto frame = features::frame_from_json(parse_body(req));
    send_json(res, 200, events_json(service.ingest_frame(req.matches[1], frame)));
  });

  post(R"(/sessions/([^/]+)/commands)", [&service](const auto& req, auto& res) {
    const auto event = rehab::event_from_json(parse_body(req));
    send_json(res, 200, events_json(service.command(req.matches[1], event)));
  });

  get(R"(/sessions/([^/]+)/events)", [&service](const auto& req, auto& res) {
    std::uint64_t since = 0;
    if (req.has_param("since")) {
      const std::string text = req.get_param_value("since");
      std::size_t pos = 0;
      try {
        since = std::stoull(text, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != text.size())
        throw ServiceError("BadRequest", 400, "since must be a non-negative integer");
    }
    send_json(res, 200, events_json(service.events_since(req.matches[1], since)));
  });

  get(R"(/sessions/([^/]+)/log)", [&service](const auto& req, auto& res) {
    std::ostringstream out;
    rehab::write_session_log(out, service.session_log(req.matches[1]));
    res.status = 200;
    res.set_content(out.str(), "application/x-ndjson");
  });

  post(R"(/sessions/([^/]+)/complete)", [&service](const auto& req, auto& res) {
    send_json(res, 200, rehab::report_to_json(service.complete_session(req.matches[1])));
  });

  get(R"(/patients/([^/]+)/report)", [&service](const auto& req, auto& res) {
    const std::string id = req.matches[1];
    nlohmann::json sessions = nlohmann::json::array();
    for (const auto& r : service.patient_report(id)) sessions.push_back(rehab::report_to_json(r));
    send_json(res, 200, {{"patient_id", id}, {"sessions", std::move(sessions)}});
  });

  get(R"(/patients/([^/]+)/aggregate)", [&service](const auto& req, auto& res) {
    const std::string id = req.matches[1];
    const auto agg = service.patient_aggregate(id);
    send_json(res, 200, {{"patient_id", id}, {"regions", store::aggregate_to_json(agg)}});
  });

  post("/detect", [&service](const auto& req, auto& res) {
    send_json(res, 200, detect_result_to_json(detect_from_json(service, parse_body(req))));
  });
}

bool run_server(SessionService& service, const std::string& host, int port, const HttpOptions& options) {
  httplib::Server server;
  install_routes(server, service, options);

  std::mutex mu;
  std::condition_variable cv;
  bool stop = false;
  std::thread reaper([&] {
    std::unique_lock lock(mu);
    while (!cv.wait_for(lock, options.reap_interval, [&] { return stop; })) {
      lock.unlock();
      try {
        service.reap_expired();
      } catch (const std::exception&) {
        // Retried on the next tick; the session stays live until it persists.
      }
      lock.lock();
    }
  });

  const bool ok = server.listen(host, port);
  {
    std::lock_guard lock(mu);
    stop = true;
  }
  cv.notify_all();
  reaper.join();
  return ok;
}

}  // namespace hc::service
