#pragma once

// HTTP transport for SkillGateway: JSON turns over request/response plus a
// server-sent event stream for robot-initiated turns.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>

#include "convoforge/gateway.hpp"

namespace convoforge {

inline constexpr int kDefaultPort = 8732;

/// CONVOFORGE_PORT if set and valid, else the default.
inline int port_from_env() {
  if (const char* env = std::getenv("CONVOFORGE_PORT")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v < 65536) return static_cast<int>(v);
  }
  return kDefaultPort;
}

inline std::string encode_array(const std::vector<wire::Message>& messages) {
  std::string out = "[";
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out += ',';
    out += wire::encode(messages[i]);
  }
  out += ']';
  return out;
}

class HttpService {
 public:
  explicit HttpService(SkillGateway& gateway) : gateway_(gateway) {
    // httplib's default adds SO_REUSEPORT, which lets a second server share
    // the port instead of failing to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    routes();
  }

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds `host:port`; port 0 picks a free port. Returns the bound port,
  /// or -1 on failure.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }

  /// Blocks until stop().
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  static constexpr const char* kJson = "application/json";

  void fail(httplib::Response& res, const std::string& session, const std::string& code, int status,
            const std::string& message) {
    res.status = status;
    res.set_content(wire::encode(gateway_.error_message(session, code, message)), kJson);
  }

  template <typename F>
  void guarded(httplib::Response& res, const std::string& session, F&& body) {
    try {
      body();
    } catch (const wire::WireError& e) {
      fail(res, session, e.code(), 400, e.what());
    } catch (const GatewayError& e) {
      fail(res, session, e.code(), e.http_status(), e.what());
    } catch (const EngineError& e) {
      fail(res, session, e.code(), 409, e.what());
    } catch (const std::exception& e) {
      fail(res, session, "INTERNAL", 500, e.what());
    }
  }

  void routes() {
    server_.Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, "", [&] {
        const wire::Message start = wire::decode(req.body);
        res.status = 201;
        res.set_content(wire::encode(gateway_.open_session(start)), kJson);
      });
    });

    server_.Post(R"(/session/([^/]+)/turn)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, id, [&] {
        const wire::Message turn = wire::decode(req.body);
        res.set_content(encode_array(gateway_.user_turn(id, turn)), kJson);
      });
    });

    server_.Post(R"(/session/([^/]+)/event)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, id, [&] {
        const wire::Message msg = wire::decode(req.body);
        const auto* ev = msg.as<wire::Event>();
        if (!ev) throw GatewayError(wire::codes::kInvalidMessage, 400, "expected Event");
        if (!gateway_.has_session(id)) throw GatewayError("NO_SESSION", 404, "no session " + id);
        gateway_.post_event(id, ev->dialogue, ev->bindings);
        res.status = 202;
      });
    });

    server_.Post(R"(/session/([^/]+)/fault)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, id, [&] {
        json j;
        try {
          j = json::parse(req.body);
        } catch (const json::parse_error& e) {
          throw wire::WireError(wire::codes::kMalformedJson, e.what());
        }
        if (j.is_object() && j.size() == 1 && j.contains("item_unavailable") && j["item_unavailable"].is_string())
          gateway_.inject_fault(id, ItemUnavailableFault{j["item_unavailable"].get<std::string>()});
        else if (j.is_object() && j.size() == 1 && j.contains("robot_error") && j["robot_error"].is_string())
          gateway_.inject_fault(id, RobotErrorFault{j["robot_error"].get<std::string>()});
        else
          throw GatewayError(wire::codes::kInvalidMessage, 400, "expected {item_unavailable} or {robot_error}");
        res.status = 202;
      });
    });

    server_.Get(R"(/session/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, id, [&] {
        std::shared_ptr<EventChannel> channel = gateway_.events(id);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [channel](std::size_t, httplib::DataSink& sink) {
          if (auto m = channel->wait_pop(std::chrono::milliseconds(100))) {
            const std::string frame = "data: " + wire::encode(*m) + "\n\n";
            return sink.write(frame.data(), frame.size());
          }
          if (channel->closed()) sink.done();
          return true;
        });
      });
    });

    server_.Delete(R"(/session/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, id, [&] { res.set_content(wire::encode(gateway_.close_session(id).end), kJson); });
    });
  }

  SkillGateway& gateway_;
  httplib::Server server_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace convoforge
