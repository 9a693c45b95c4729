#pragma once

// Session registry and message routing. Transport-agnostic: http_service.hpp
// exposes it over HTTP, the experiment harness drives it in-process.
//
// Every clock advance in a session is attributed to exactly one log entry,
// so summing `dur_ms` over a session log reproduces its simulated time.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "convoforge/baseline.hpp"
#include "convoforge/engine.hpp"
#include "convoforge/orchestrator.hpp"
#include "convoforge/task.hpp"
#include "convoforge/wire.hpp"

namespace convoforge {

enum class Mode { conversation, baseline };

inline const char* to_string(Mode m) { return m == Mode::conversation ? "conversation" : "baseline"; }

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "conversation") return Mode::conversation;
  if (s == "baseline") return Mode::baseline;
  return std::nullopt;
}

class GatewayError : public std::runtime_error {
 public:
  GatewayError(std::string code, int http_status, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)), http_status_(http_status) {}
  const std::string& code() const noexcept { return code_; }
  int http_status() const noexcept { return http_status_; }

 private:
  std::string code_;
  int http_status_;
};

/// Robot-initiated turns waiting for the event stream.
class EventChannel {
 public:
  void push(wire::Message m) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(m));
    }
    cv_.notify_all();
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::vector<wire::Message> drain() {
    std::lock_guard lock(mu_);
    std::vector<wire::Message> out(queue_.begin(), queue_.end());
    queue_.clear();
    return out;
  }

  /// Next message, or nullopt on timeout or once closed and empty.
  std::optional<wire::Message> wait_pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    wire::Message m = std::move(queue_.front());
    queue_.pop_front();
    return m;
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_ && queue_.empty();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<wire::Message> queue_;
  bool closed_ = false;
};

/// One line per event; `at_ms` and `dur_ms` are added by the session.
using SessionLog = std::vector<json>;

struct SessionView {
  Mode mode = Mode::conversation;
  TaskState task;
  SimTime now;
  ConversationState conversation;
  SessionLog log;
};

struct ClosedSession {
  wire::Message end;
  SessionLog log;
};

struct GatewayOptions {
  std::function<void(std::string_view)> warn = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  EventRouting routing;
};

class SkillGateway {
 public:
  SkillGateway(std::shared_ptr<const DialogueSchema> schema, TaskConfig task, ApiHandlerTable handlers = default_handlers(),
               GatewayOptions options = {})
      : engine_(std::move(schema)),
        task_(std::move(task)),
        handlers_(std::move(handlers)),
        options_(std::move(options)) {
    auto problems = check_handlers(engine_.schema(), handlers_);
    auto more = check_task_against_schema(engine_.schema(), task_);
    problems.insert(problems.end(), more.begin(), more.end());
    for (const auto* name : {&options_.routing.issue_dialogue, &options_.routing.suggestion_dialogue})
      if (!engine_.schema().dialogue(*name)) problems.push_back("event dialogue " + *name + " not in schema");
    if (!problems.empty()) throw GatewayError("STARTUP_CHECK", 500, problems.front());
  }

  const DialogueSchema& schema() const { return engine_.schema(); }
  const TaskConfig& task_config() const { return task_; }

  /// Returns the acknowledgement carrying the session id.
  wire::Message open_session(const wire::Message& start) {
    const auto* body = start.as<wire::SessionStart>();
    if (!body) throw GatewayError(wire::codes::kInvalidMessage, 400, "expected SessionStart");
    if (start.session.empty()) throw GatewayError("INVALID_SESSION_ID", 400, "session id must be non-empty");
    const auto mode = parse_mode(body->mode);
    if (!mode) throw GatewayError(wire::codes::kInvalidMessage, 400, "unknown mode " + body->mode);
    if (body->schema_name != schema().name)
      throw GatewayError("SCHEMA_MISMATCH", 400, "server runs schema " + schema().name);

    auto session = std::make_shared<Session>(task_);
    session->id = start.session;
    session->mode = *mode;
    session->conversation = engine_.start_session(start.session);
    session->last_client_seq = start.seq;
    {
      std::lock_guard lock(registry_mu_);
      if (!sessions_.emplace(start.session, session).second)
        throw GatewayError("DUPLICATE_SESSION", 409, "session " + start.session + " exists");
    }
    std::lock_guard lock(session->mu);
    log_message(*session, start, "in", SimTime{});
    return emit(*session, wire::SessionStart{schema().name, body->mode});
  }

  /// Robot turns in emission order: one reply, or an API call followed by
  /// the reply its result produced.
  std::vector<wire::Message> user_turn(const std::string& id, const wire::Message& msg) {
    const auto* body = msg.as<wire::UserTurn>();
    if (!body) throw GatewayError(wire::codes::kInvalidMessage, 400, "expected UserTurn");
    auto session = find(id);
    std::lock_guard lock(session->mu);
    accept_client(*session, msg);
    Session& s = *session;
    log_message(s, msg, "in", speech(body->text));

    std::vector<wire::Message> replies;
    if (s.mode == Mode::baseline) {
      const SimTime before = s.clock.now();
      const std::string reply = baseline::respond(body->text, s.task, s.clock);
      log_sim(s, before, {{"op", "robot_action"}});
      s.baseline_exchanges.emplace_back(body->text, reply);
      replies.push_back(emit(s, wire::RobotTurn{"respond", reply, {}, {}, {}}));
      return replies;
    }

    if (!ConversationEngine::accepts_user(s.conversation.phase))
      throw GatewayError("PROTOCOL_VIOLATION", 409, "session does not accept user turns");
    Transition t = engine_.user_turn(std::move(s.conversation), body->text, s.clock.now());
    s.conversation = std::move(t.state);
    replies.push_back(emit(s, wire::robot_turn_from(t.action)));
    while (const auto* call = std::get_if<ApiCall>(&t.action)) {
      emit(s, wire::ApiCall{call->api, call->args});
      const SimTime before = s.clock.now();
      ApiResult result = handle_api(handlers_, call->api, call->args, s.task, s.clock);
      emit(s, wire::ApiResult{result.status, result.payload}, s.clock.now() - before, before);
      t = engine_.apply_api_result(std::move(s.conversation), result.status, result.payload, s.clock.now());
      s.conversation = std::move(t.state);
      replies.push_back(emit(s, wire::robot_turn_from(t.action)));
    }
    flush_deferred(s);
    return replies;
  }

  ClosedSession close_session(const std::string& id, std::string reason = "client") {
    std::shared_ptr<Session> session;
    {
      std::lock_guard lock(registry_mu_);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) throw GatewayError("NO_SESSION", 404, "no session " + id);
      session = it->second;
      sessions_.erase(it);
    }
    std::lock_guard lock(session->mu);
    session->conversation = engine_.end_session(std::move(session->conversation));
    wire::Message end = emit(*session, wire::SessionEnd{std::move(reason)});
    session->events->close();
    return ClosedSession{std::move(end), session->log};
  }

  /// Robot-initiated dialogue by name. Dropped with a warning when the
  /// session is gone, silently for baseline sessions; deferred while a
  /// dialogue is busy.
  bool post_event(const std::string& id, const std::string& dialogue, const Bindings& bindings) {
    if (!schema().dialogue(dialogue)) throw GatewayError("UNKNOWN_DIALOGUE", 400, "no dialogue " + dialogue);
    auto session = try_find(id);
    if (!session) {
      options_.warn("event " + dialogue + " for ended session " + id + " dropped");
      return false;
    }
    std::lock_guard lock(session->mu);
    return deliver(*session, Initiation{dialogue, bindings});
  }

  void inject_fault(const std::string& id, const Fault& fault) {
    auto session = find(id);
    std::lock_guard lock(session->mu);
    Session& s = *session;
    SimEvent ev;
    try {
      ev = s.task.inject_fault(fault);
    } catch (const TaskError& e) {
      throw GatewayError(e.code(), 400, e.what());
    }
    json rec{{"op", "fault"}};
    if (const auto* f = std::get_if<ItemUnavailableFault>(&fault))
      rec["item_unavailable"] = f->item;
    else
      rec["robot_error"] = std::get<RobotErrorFault>(fault).code;
    log_sim(s, s.clock.now(), std::move(rec));
    if (auto init = on_sim_event(ev, s.task, options_.routing)) deliver(s, *init);
  }

  PickOutcome human_pick(const std::string& id, const std::string& item) {
    auto session = find(id);
    std::lock_guard lock(session->mu);
    Session& s = *session;
    const SimTime before = s.clock.now();
    PickOutcome out;
    try {
      out = s.task.human_pick(item, s.clock);
    } catch (const TaskError& e) {
      throw GatewayError(e.code(), 400, e.what());
    }
    log_sim(s, before, {{"op", "human_pick"}, {"item", item}, {"outcome", to_string(out)}});
    return out;
  }

  StepStatus assemble(const std::string& id, int step, const std::set<std::string>& used) {
    auto session = find(id);
    std::lock_guard lock(session->mu);
    Session& s = *session;
    const SimTime before = s.clock.now();
    StepStatus status;
    try {
      status = s.task.assemble_step(step, used, s.clock);
    } catch (const TaskError& e) {
      throw GatewayError(e.code(), 409, e.what());
    }
    log_sim(s, before,
            {{"op", "assemble"}, {"step", step}, {"using", std::vector<std::string>(used.begin(), used.end())},
             {"result", to_string(status)}});
    if (status == StepStatus::done_correct) {
      if (auto init = on_sim_event(SimEvent{SimEvent::Kind::step_completed, {}, step}, s.task, options_.routing))
        deliver(s, *init);
    }
    return status;
  }

  std::shared_ptr<EventChannel> events(const std::string& id) { return find(id)->events; }

  SessionView view(const std::string& id) {
    auto session = find(id);
    std::lock_guard lock(session->mu);
    return SessionView{session->mode, session->task, session->clock.now(), session->conversation, session->log};
  }

  bool has_session(const std::string& id) const {
    std::lock_guard lock(registry_mu_);
    return sessions_.contains(id);
  }

  /// Error reply for a failed request, sequenced in the session's stream
  /// when the session exists.
  wire::Message error_message(const std::string& id, const std::string& code, const std::string& message) {
    auto session = try_find(id);
    if (!session) return wire::Message{std::string(wire::kVersion), id, 0, wire::Error{code, message}};
    std::lock_guard lock(session->mu);
    return emit(*session, wire::Error{code, message});
  }

 private:
  struct Session {
    explicit Session(const TaskConfig& config) : task(config) {}

    std::mutex mu;
    std::string id;
    Mode mode = Mode::conversation;
    ConversationState conversation;
    std::vector<std::pair<std::string, std::string>> baseline_exchanges;
    TaskState task;
    SimClock clock;
    std::deque<Initiation> deferred;
    std::shared_ptr<EventChannel> events = std::make_shared<EventChannel>();
    std::int64_t server_seq = 0;
    std::int64_t last_client_seq = 0;
    SessionLog log;
  };

  std::shared_ptr<Session> try_find(const std::string& id) const {
    std::lock_guard lock(registry_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    auto s = try_find(id);
    if (!s) throw GatewayError("NO_SESSION", 404, "no session " + id);
    return s;
  }

  static void accept_client(Session& s, const wire::Message& msg) {
    if (msg.session != s.id) throw GatewayError(wire::codes::kInvalidMessage, 400, "session id mismatch");
    if (msg.seq <= s.last_client_seq)
      throw GatewayError(wire::codes::kSeqRegression, 400,
                         "seq " + std::to_string(msg.seq) + " after " + std::to_string(s.last_client_seq));
    s.last_client_seq = msg.seq;
  }

  SimTime speech(std::string_view text) const {
    return SimTime{static_cast<std::int64_t>(word_count(text)) * task_.durations.speech_per_token.ms};
  }

  // Records a message received ("in") or sent ("out") at `at`, lasting
  // `dur`, and advances the clock past it unless `at` is given.
  void log_message(Session& s, const wire::Message& m, const char* dir, SimTime dur,
                   std::optional<SimTime> at = std::nullopt) {
    const SimTime start = at.value_or(s.clock.now());
    s.log.push_back(
        {{"entry", "wire"}, {"dir", dir}, {"at_ms", start.ms}, {"dur_ms", dur.ms}, {"msg", wire::to_json(m)}});
    if (!at) s.clock.advance(dur);
  }

  // Records a simulator action that ran from `before` to now.
  static void log_sim(Session& s, SimTime before, json rec) {
    rec["entry"] = "sim";
    rec["at_ms"] = before.ms;
    rec["dur_ms"] = (s.clock.now() - before).ms;
    s.log.push_back(std::move(rec));
  }

  wire::Message emit(Session& s, wire::Body body, std::optional<SimTime> dur = std::nullopt,
                     std::optional<SimTime> at = std::nullopt) {
    wire::Message m{std::string(wire::kVersion), s.id, ++s.server_seq, std::move(body)};
    SimTime d{};
    if (dur)
      d = *dur;
    else if (const auto* r = m.as<wire::RobotTurn>())
      d = speech(r->text);
    log_message(s, m, "out", d, at);
    return m;
  }

  bool deliver(Session& s, const Initiation& init) {
    if (s.mode == Mode::baseline) return false;
    if (std::holds_alternative<phase::Ended>(s.conversation.phase)) {
      options_.warn("event " + init.dialogue + " for ended session " + s.id + " dropped");
      return false;
    }
    if (ConversationEngine::is_busy(s.conversation.phase)) {
      s.deferred.push_back(init);
      return true;
    }
    emit(s, wire::Event{init.dialogue, init.bindings});
    Transition t = engine_.initiate_dialogue(std::move(s.conversation), init.dialogue, init.bindings, s.clock.now());
    s.conversation = std::move(t.state);
    s.events->push(emit(s, wire::robot_turn_from(t.action)));
    return true;
  }

  void flush_deferred(Session& s) {
    while (!s.deferred.empty() && !ConversationEngine::is_busy(s.conversation.phase)) {
      Initiation next = std::move(s.deferred.front());
      s.deferred.pop_front();
      deliver(s, next);
    }
  }

  ConversationEngine engine_;
  TaskConfig task_;
  ApiHandlerTable handlers_;
  GatewayOptions options_;
  mutable std::mutex registry_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace convoforge
