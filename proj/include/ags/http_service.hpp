#pragma once

// HTTP/JSON front end for SessionManager.
//
//   POST /sessions                      {task_id, method, budget?, mode?, seed?}
//   GET  /sessions/{id}/suggestion
//   POST /sessions/{id}/observations    {parcel_id, label, override?}
//   GET  /sessions/{id}
//   GET  /tasks
//
// Errors are {"code": ..., "message": ...} with status 400 (validation),
// 404 (unknown task/session) or 409 (sequencing / terminal state).

#include <functional>
#include <string>

#include <json.hpp>

// Before httplib: <resolv.h> defines a _res macro that collides with Eigen.
#include "ags/session.hpp"

#include <httplib.h>

namespace ags {

class HttpService {
 public:
  explicit HttpService(SessionManager& sessions) : sessions_(sessions) { routes(); }

  httplib::Server& server() { return server_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  static void send(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send(res, status, {{"code", code}, {"message", message}});
  }

  // Maps engine exceptions onto status codes.
  static void guarded(httplib::Response& res, const std::function<void()>& body) {
    try {
      body();
    } catch (const NotFound& e) {
      error(res, 404, "not_found", e.what());
    } catch (const SequencingError& e) {
      error(res, 409, "sequencing_error", e.what());
    } catch (const StateError& e) {
      error(res, 409, "terminal_state", e.what());
    } catch (const ContractViolation& e) {
      error(res, 409, "sequencing_error", e.what());
    } catch (const Json::exception& e) {
      error(res, 400, "validation_error", std::string("malformed request: ") + e.what());
    } catch (const InvalidArgument& e) {
      error(res, 400, "validation_error", e.what());
    } catch (const ConfigError& e) {
      error(res, 400, "validation_error", e.what());
    } catch (const std::exception& e) {
      error(res, 500, "internal_error", e.what());
    }
  }

  static Json body_json(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
    return j;
  }

  void routes() {
    server_.Get("/tasks", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, sessions_.list_tasks()); });
    });

    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json b = body_json(req);
        SessionConfig cfg;
        if (!b.contains("task_id") || !b["task_id"].is_string()) throw InvalidArgument("task_id (string) is required");
        cfg.task_id = b["task_id"].get<std::string>();
        cfg.method = b.value("method", cfg.method);
        if (b.contains("budget")) {
          if (!b["budget"].is_number() || !(b["budget"].get<double>() > 0.0))
            throw InvalidArgument("budget must be a positive number");
          cfg.budget = b["budget"].get<double>();
        }
        cfg.mode = parse_budget_mode(b.value("mode", std::string("paper-literal")));
        cfg.seed = b.value("seed", std::uint64_t{1});
        send(res, 201, sessions_.create(cfg));
      });
    });

    server_.Get(R"(/sessions/([A-Za-z0-9_-]+)/suggestion)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, sessions_.suggestion(req.matches[1])); });
    });

    server_.Post(R"(/sessions/([A-Za-z0-9_-]+)/observations)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   guarded(res, [&] {
                     const Json b = body_json(req);
                     if (!b.contains("parcel_id") || !b["parcel_id"].is_number_integer() ||
                         b["parcel_id"].get<long long>() < 0)
                       throw InvalidArgument("parcel_id (non-negative integer) is required");
                     if (!b.contains("label") || !b["label"].is_number_integer())
                       throw InvalidArgument("label must be 0 or 1");
                     const bool ov = b.value("override", false);
                     send(res, 200,
                          sessions_.observe(req.matches[1], b["parcel_id"].get<ParcelId>(), b["label"].get<int>(), ov));
                   });
                 });

    server_.Get(R"(/sessions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, sessions_.state(req.matches[1])); });
    });
  }

  SessionManager& sessions_;
  httplib::Server server_;
};

}  // namespace ags
