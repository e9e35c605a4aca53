#pragma once

// HTTP control surface for a running engine.
//
//   GET  /state               latest sample, mode, SOC, charger state
//   POST /mode                {"mode": "manual|zero_export|arbitrage|dr|idle", ...params}
//   POST /setpoint            {"kw": 2.0}
//   GET  /trace?from=T        trace rows with t >= T
//   GET  /stream              server-sent events, one per new trace row

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "v2h/engine/config.hpp"
#include "v2h/engine/engine.hpp"

namespace v2h::engine {

using nlohmann::json;

inline json state_json(const EngineState& s) {
  json j;
  if (s.latest) {
    j["latest"] = {{"t", s.latest->t},
                   {"p_net_kw", s.latest->p_net_kw},
                   {"p_ev_kw", s.latest->p_ev_kw},
                   {"soc_pct", s.latest->soc_pct},
                   {"house_load_kw", s.latest->house_load_kw}};
    j["soc_pct"] = s.latest->soc_pct;
  } else {
    j["latest"] = nullptr;
    j["soc_pct"] = nullptr;
  }
  j["mode"] = s.mode.empty() ? "idle" : s.mode;
  j["charger_state"] = devsim::to_string(s.charger.state);
  j["remote"] = s.charger.remote;
  j["setpoint_kw"] = s.last_setpoint_kw ? json(*s.last_setpoint_kw) : json(nullptr);
  j["failsafe_pending"] = s.failsafe_pending;
  j["last_error"] = s.last_error;
  return j;
}

/// Builds a ControlMode from a POST /mode body. Throws std::invalid_argument.
inline ControlMode mode_from_json(const json& body, const EngineConfig& config) {
  if (!body.is_object() || !body.contains("mode") || !body["mode"].is_string()) {
    throw std::invalid_argument("body must be an object with a string 'mode'");
  }
  auto num = [&](const char* key, double fallback) {
    if (!body.contains(key)) return fallback;
    if (!body[key].is_number()) throw std::invalid_argument(std::string(key) + " must be a number");
    return body[key].get<double>();
  };
  const std::string name = body["mode"].get<std::string>();
  if ((name == "manual") && !body.contains("kw")) throw std::invalid_argument("manual mode needs 'kw'");
  EngineConfig c = config;
  c.alpha_kw = num("alpha", config.alpha_kw);
  const DrEvent dr{num("start", 0.0), num("end", 0.0), num("kw", 0.0)};
  return make_mode(name, c, num("kw", 0.0), num("soc_floor_pct", 30.0), num("soc_ceiling_pct", 90.0), dr);
}

class ApiServer {
 public:
  ApiServer(Engine& engine, std::string host, int port, std::string token = {})
      : engine_(engine), token_(std::move(token)) {
    install_routes();
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
    } else {
      port_ = server_.bind_to_port(host, port) ? port : -1;
    }
    if (port_ < 0) throw std::runtime_error("cannot bind API to " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;
  ~ApiServer() { stop(); }

  int port() const { return port_; }

  void stop() {
    stopping_ = true;
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void reply_error(httplib::Response& res, int status, const std::string& msg) {
    reply(res, status, json{{"error", msg}});
  }

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (token_.empty()) return true;
    if (req.get_header_value("Authorization") == "Bearer " + token_) return true;
    reply_error(res, 401, "missing or wrong token");
    return false;
  }

  void install_routes() {
    server_.Get("/state", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      reply(res, 200, state_json(engine_.state()));
    });

    server_.Post("/mode", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      try {
        const auto mode = mode_from_json(json::parse(req.body), engine_.config());
        if (engine_.state().charger.state == devsim::ChargerState::Fault &&
            !std::holds_alternative<IdleMode>(mode)) {
          return reply_error(res, 409, "charger is faulted");
        }
        engine_.request_mode(mode);
        reply(res, 200, json{{"mode", mode_name(mode)}, {"applied", "next_cycle"}});
      } catch (const json::exception& e) {
        reply_error(res, 400, e.what());
      } catch (const std::invalid_argument& e) {
        reply_error(res, 400, e.what());
      }
    });

    server_.Post("/setpoint", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      try {
        const auto body = json::parse(req.body);
        if (!body.contains("kw") || !body["kw"].is_number()) {
          return reply_error(res, 400, "body needs numeric 'kw'");
        }
        const double kw = body["kw"].get<double>();
        engine_.request_setpoint(kw);
        reply(res, 200, json{{"setpoint_kw", kw}, {"applied", "next_cycle"}});
      } catch (const json::exception& e) {
        reply_error(res, 400, e.what());
      } catch (const std::invalid_argument& e) {
        reply_error(res, 400, e.what());
      } catch (const ModeConflict& e) {
        reply_error(res, 409, e.what());
      } catch (const ChargerFaulted& e) {
        reply_error(res, 409, e.what());
      }
    });

    server_.Get("/trace", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      double from = -1e300;
      if (req.has_param("from")) {
        try {
          from = std::stod(req.get_param_value("from"));
        } catch (const std::exception&) {
          return reply_error(res, 400, "'from' must be a number");
        }
      }
      json rows = json::array();
      for (const auto& r : engine_.trace().since(from)) rows.push_back(to_json(r));
      reply(res, 200, rows);
    });

    server_.Get("/stream", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      auto cursor = std::make_shared<std::size_t>(engine_.trace().size());
      res.set_chunked_content_provider(
          "text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
            if (stopping_) return false;
            const auto rows = engine_.trace().wait_from(*cursor, std::chrono::milliseconds(250));
            if (rows.empty()) {
              static constexpr char kKeepAlive[] = ": keep-alive\n\n";
              return sink.write(kKeepAlive, sizeof(kKeepAlive) - 1);
            }
            *cursor += rows.size();
            for (const auto& r : rows) {
              const std::string event = "data: " + to_json(r).dump() + "\n\n";
              if (!sink.write(event.data(), event.size())) return false;
            }
            return true;
          });
    });
  }

  Engine& engine_;
  std::string token_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<bool> stopping_{false};
};

/// Starts the HTTP API for `engine`; port 0 picks an ephemeral port.
inline std::unique_ptr<ApiServer> serve_api(Engine& engine, const std::string& host = "127.0.0.1",
                                            int port = 0, std::string token = {}) {
  return std::make_unique<ApiServer>(engine, host, port, std::move(token));
}

}  // namespace v2h::engine
