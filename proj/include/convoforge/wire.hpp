#pragma once

// JSON wire protocol between operator clients, the gateway and the back-end.
// Output is canonical: keys sorted, no insignificant whitespace, UTF-8.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "convoforge/engine.hpp"

namespace convoforge::wire {

using json = nlohmann::json;
using StringMap = std::map<std::string, std::string>;

inline constexpr std::string_view kVersion = "1.0";

struct UserTurn {
  std::string text;
  bool operator==(const UserTurn&) const = default;
};
struct RobotTurn {
  std::string action;
  std::string text;
  std::optional<std::string> slot;
  std::optional<std::string> api;
  std::optional<StringMap> args;
  bool operator==(const RobotTurn&) const = default;
};
struct ApiCall {
  std::string api;
  StringMap args;
  bool operator==(const ApiCall&) const = default;
};
struct ApiResult {
  std::string status;
  StringMap payload;
  bool operator==(const ApiResult&) const = default;
};
struct Event {
  std::string dialogue;
  StringMap bindings;
  bool operator==(const Event&) const = default;
};
struct SessionStart {
  std::string schema_name;
  std::string mode;
  bool operator==(const SessionStart&) const = default;
};
struct SessionEnd {
  std::string reason;
  bool operator==(const SessionEnd&) const = default;
};
struct Error {
  std::string code;
  std::string message;
  bool operator==(const Error&) const = default;
};

using Body = std::variant<UserTurn, RobotTurn, ApiCall, ApiResult, Event, SessionStart, SessionEnd, Error>;

inline constexpr const char* kKindNames[] = {"UserTurn", "RobotTurn", "ApiCall",    "ApiResult",
                                             "Event",    "SessionStart", "SessionEnd", "Error"};

struct Message {
  std::string version{kVersion};
  std::string session;
  std::int64_t seq = 0;
  Body body;
  bool operator==(const Message&) const = default;

  const char* kind() const { return kKindNames[body.index()]; }
  template <typename T>
  const T* as() const {
    return std::get_if<T>(&body);
  }
};

/// Stable error codes carried by WireError and by Error messages.
namespace codes {
inline constexpr const char* kMalformedJson = "MALFORMED_JSON";
inline constexpr const char* kUnknownKind = "UNKNOWN_KIND";
inline constexpr const char* kVersionMismatch = "VERSION_MISMATCH";
inline constexpr const char* kSeqRegression = "SEQ_REGRESSION";
inline constexpr const char* kInvalidMessage = "INVALID_MESSAGE";
}  // namespace codes

class WireError : public std::runtime_error {
 public:
  WireError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

inline json body_to_json(const Body& body) {
  return std::visit(
      [](const auto& b) -> json {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, UserTurn>) {
          return {{"text", b.text}};
        } else if constexpr (std::is_same_v<T, RobotTurn>) {
          json j{{"action", b.action}, {"text", b.text}};
          if (b.slot) j["slot"] = *b.slot;
          if (b.api) j["api"] = *b.api;
          if (b.args) j["args"] = *b.args;
          return j;
        } else if constexpr (std::is_same_v<T, ApiCall>) {
          return {{"api", b.api}, {"args", b.args}};
        } else if constexpr (std::is_same_v<T, ApiResult>) {
          return {{"status", b.status}, {"payload", b.payload}};
        } else if constexpr (std::is_same_v<T, Event>) {
          return {{"dialogue", b.dialogue}, {"bindings", b.bindings}};
        } else if constexpr (std::is_same_v<T, SessionStart>) {
          return {{"schema_name", b.schema_name}, {"mode", b.mode}};
        } else if constexpr (std::is_same_v<T, SessionEnd>) {
          return {{"reason", b.reason}};
        } else {
          return {{"code", b.code}, {"message", b.message}};
        }
      },
      body);
}

inline json to_json(const Message& m) {
  return {{"version", m.version}, {"session", m.session}, {"seq", m.seq}, {"kind", m.kind()},
          {"body", body_to_json(m.body)}};
}

/// Canonical bytes. nlohmann's default object type is an ordered std::map,
/// so keys come out sorted bytewise.
inline std::string encode(const Message& m) { return to_json(m).dump(-1, ' ', false); }

namespace detail {

class Fields {
 public:
  Fields(const json& j, const char* where) : j_(j), where_(where) {
    if (!j_.is_object()) fail("expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) pending_.insert(it.key());
  }

  std::string string(const char* key) {
    const json& v = take(key);
    if (!v.is_string()) fail(std::string(key) + " must be a string");
    return v.get<std::string>();
  }

  std::optional<std::string> opt_string(const char* key) {
    if (!j_.contains(key)) return std::nullopt;
    return string(key);
  }

  StringMap map(const char* key) {
    const json& v = take(key);
    if (!v.is_object()) fail(std::string(key) + " must be an object");
    StringMap out;
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (!it.value().is_string()) fail(std::string(key) + "." + it.key() + " must be a string");
      out.emplace(it.key(), it.value().get<std::string>());
    }
    return out;
  }

  std::optional<StringMap> opt_map(const char* key) {
    if (!j_.contains(key)) return std::nullopt;
    return map(key);
  }

  const json& take(const char* key) {
    if (!j_.contains(key)) fail(std::string("missing ") + key);
    pending_.erase(key);
    return j_.at(key);
  }

  void finish() const {
    if (!pending_.empty()) fail("unexpected field " + *pending_.begin());
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw WireError(codes::kInvalidMessage, std::string(where_) + ": " + why);
  }

 private:
  const json& j_;
  const char* where_;
  std::set<std::string> pending_;
};

inline Body body_from_json(std::string_view kind, const json& j) {
  Fields f(j, "body");
  Body body;
  if (kind == "UserTurn") {
    body = UserTurn{f.string("text")};
  } else if (kind == "RobotTurn") {
    RobotTurn r;
    r.action = f.string("action");
    r.text = f.string("text");
    r.slot = f.opt_string("slot");
    r.api = f.opt_string("api");
    r.args = f.opt_map("args");
    body = std::move(r);
  } else if (kind == "ApiCall") {
    body = ApiCall{f.string("api"), f.map("args")};
  } else if (kind == "ApiResult") {
    body = ApiResult{f.string("status"), f.map("payload")};
  } else if (kind == "Event") {
    body = Event{f.string("dialogue"), f.map("bindings")};
  } else if (kind == "SessionStart") {
    body = SessionStart{f.string("schema_name"), f.string("mode")};
  } else if (kind == "SessionEnd") {
    body = SessionEnd{f.string("reason")};
  } else {
    body = Error{f.string("code"), f.string("message")};
  }
  f.finish();
  return body;
}

inline bool known_kind(std::string_view kind) {
  for (const char* k : kKindNames)
    if (kind == k) return true;
  return false;
}

}  // namespace detail

/// Parses any key order and whitespace. Does not check sequencing; see
/// SeqGuard.
inline Message decode(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw WireError(codes::kMalformedJson, e.what());
  }
  if (!j.is_object()) throw WireError(codes::kMalformedJson, "top level must be an object");
  detail::Fields env(j, "envelope");
  Message m;
  m.version = env.string("version");
  if (m.version != kVersion) throw WireError(codes::kVersionMismatch, "unsupported version " + m.version);
  const std::string kind = env.string("kind");
  if (!detail::known_kind(kind)) throw WireError(codes::kUnknownKind, "unknown kind " + kind);
  m.session = env.string("session");
  const json& seq = env.take("seq");
  if (!seq.is_number_integer()) env.fail("seq must be an integer");
  m.seq = seq.get<std::int64_t>();
  m.body = detail::body_from_json(kind, env.take("body"));
  env.finish();
  return m;
}

/// Tracks the last sequence number per session for one direction.
class SeqGuard {
 public:
  void check(const Message& m) {
    auto [it, inserted] = last_.try_emplace(m.session, m.seq);
    if (inserted) return;
    if (m.seq <= it->second)
      throw WireError(codes::kSeqRegression, "seq " + std::to_string(m.seq) + " after " + std::to_string(it->second));
    it->second = m.seq;
  }

  void forget(const std::string& session) { last_.erase(session); }

 private:
  std::map<std::string, std::int64_t> last_;
};

/// decode() plus per-session sequencing for one inbound direction.
class Decoder {
 public:
  Message decode(std::string_view bytes) {
    Message m = wire::decode(bytes);
    guard_.check(m);
    return m;
  }

 private:
  SeqGuard guard_;
};

inline RobotTurn robot_turn_from(const RobotAction& action) {
  RobotTurn t;
  t.action = action_name(action);
  t.text = action_text(action);
  if (const auto* e = std::get_if<Elicit>(&action)) t.slot = e->slot;
  if (const auto* c = std::get_if<convoforge::ApiCall>(&action)) {
    t.api = c->api;
    t.args = c->args;
  }
  return t;
}

}  // namespace convoforge::wire
