#pragma once

// Multi-turn conversation engine. Every operation is a pure transition from
// one ConversationState value to the next plus the robot's action.

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "convoforge/matcher.hpp"
#include "convoforge/schema.hpp"
#include "convoforge/sim_time.hpp"

namespace convoforge {

struct Respond {
  std::string text;
  bool operator==(const Respond&) const = default;
};
struct Elicit {
  std::string slot;
  std::string prompt;
  bool operator==(const Elicit&) const = default;
};
struct ApiCall {
  std::string api;
  Bindings args;
  bool operator==(const ApiCall&) const = default;
};
struct EndDialogue {
  std::string text;
  bool operator==(const EndDialogue&) const = default;
};
using RobotAction = std::variant<Respond, Elicit, ApiCall, EndDialogue>;

inline const char* action_name(const RobotAction& a) {
  static constexpr const char* names[] = {"respond", "elicit", "api_call", "end_dialogue"};
  return names[a.index()];
}

/// Spoken text of an action; API calls are silent.
inline std::string action_text(const RobotAction& a) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Elicit>)
          return v.prompt;
        else if constexpr (std::is_same_v<T, ApiCall>)
          return {};
        else
          return v.text;
      },
      a);
}

enum class Speaker { user, robot };

struct Turn {
  Speaker speaker = Speaker::user;
  std::variant<std::string, RobotAction> content;
  SimTime at;
  bool initiated = false;  // first robot turn of a robot-initiated dialogue
  bool operator==(const Turn&) const = default;
};

namespace phase {
struct Idle {
  bool operator==(const Idle&) const = default;
};
struct AwaitingUser {
  bool operator==(const AwaitingUser&) const = default;
};
struct Eliciting {
  std::string dialogue;
  std::string slot;
  bool operator==(const Eliciting&) const = default;
};
struct AwaitingApi {
  std::string dialogue;
  std::string api;
  Bindings args;
  bool operator==(const AwaitingApi&) const = default;
};
struct Ended {
  bool operator==(const Ended&) const = default;
};
}  // namespace phase

using Phase = std::variant<phase::Idle, phase::AwaitingUser, phase::Eliciting, phase::AwaitingApi, phase::Ended>;

inline constexpr int kMaxNoMatch = 2;

struct ConversationState {
  std::string session_id;
  Phase phase = phase::AwaitingUser{};
  std::optional<std::string> active_dialogue;
  Bindings bindings;
  std::vector<Turn> history;
  int no_match_count = 0;
  bool operator==(const ConversationState&) const = default;
};

struct Transition {
  ConversationState state;
  RobotAction action;
};

class EngineError : public std::runtime_error {
 public:
  EngineError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ConversationEngine {
 public:
  explicit ConversationEngine(std::shared_ptr<const DialogueSchema> schema) : matcher_(std::move(schema)) {}

  const DialogueSchema& schema() const { return matcher_.schema(); }
  const UtteranceMatcher& matcher() const { return matcher_; }

  ConversationState start_session(std::string session_id) const {
    ConversationState s;
    s.session_id = std::move(session_id);
    return s;
  }

  Transition user_turn(ConversationState state, std::string_view input, SimTime now) const {
    if (!accepts_user(state.phase))
      throw EngineError("PROTOCOL_VIOLATION", "user turn not accepted in the current phase");
    state.history.push_back(Turn{Speaker::user, std::string(input), now});

    if (const auto* el = std::get_if<phase::Eliciting>(&state.phase)) {
      const phase::Eliciting elicit = *el;
      const Dialogue& d = *schema().dialogue(elicit.dialogue);
      if (fill_elicited(state, d, elicit.slot, input)) {
        state.no_match_count = 0;
        return advance(std::move(state), d, now);
      }
      if (++state.no_match_count >= kMaxNoMatch) return give_up(std::move(state), now);
      const SlotDef& slot = *d.slot(elicit.slot);
      Elicit again{slot.name, render_template(slot.elicit_prompt, state.bindings)};
      return emit(std::move(state), std::move(again), now);
    }

    auto m = matcher_.match(input, state.active_dialogue);
    if (!m) {
      if (++state.no_match_count >= kMaxNoMatch) return give_up(std::move(state), now);
      Respond reply{no_match_text(state)};
      return emit(std::move(state), std::move(reply), now);
    }
    state.no_match_count = 0;
    if (state.active_dialogue == m->dialogue) {
      for (auto& [k, v] : m->bindings) state.bindings[k] = std::move(v);
    } else {
      state.active_dialogue = m->dialogue;
      state.bindings = std::move(m->bindings);
    }
    return advance(std::move(state), *schema().dialogue(m->dialogue), now);
  }

  Transition apply_api_result(ConversationState state, std::string_view status, const Bindings& payload,
                              SimTime now) const {
    const auto* waiting = std::get_if<phase::AwaitingApi>(&state.phase);
    if (!waiting) throw EngineError("PROTOCOL_VIOLATION", "no API call is outstanding");
    const ApiDef& api = *schema().api(waiting->api);
    const ResultRoute& route = api.route(status);
    if (const auto* respond = std::get_if<RespondRoute>(&route)) {
      Bindings values = state.bindings;
      for (const auto& [k, v] : payload) values[k] = v;
      const std::string text = render_template(respond->text, values);
      clear_dialogue(state);
      return emit(std::move(state), EndDialogue{text}, now);
    }
    return activate(std::move(state), std::get<TriggerRoute>(route).dialogue, payload, now, false);
  }

  /// Robot-initiated conversation. Throws BUSY while eliciting or waiting
  /// on an API result; callers defer the event.
  Transition initiate_dialogue(ConversationState state, std::string_view dialogue, const Bindings& bindings,
                               SimTime now) const {
    if (!std::holds_alternative<phase::AwaitingUser>(state.phase) &&
        !std::holds_alternative<phase::Idle>(state.phase)) {
      if (std::holds_alternative<phase::Ended>(state.phase))
        throw EngineError("PROTOCOL_VIOLATION", "session has ended");
      throw EngineError("BUSY", "a dialogue is in progress");
    }
    if (!schema().dialogue(dialogue)) throw EngineError("UNKNOWN_DIALOGUE", "no dialogue " + std::string(dialogue));
    return activate(std::move(state), std::string(dialogue), bindings, now, true);
  }

  ConversationState end_session(ConversationState state) const {
    clear_dialogue(state);
    state.phase = phase::Ended{};
    return state;
  }

  static bool accepts_user(const Phase& p) {
    return std::holds_alternative<phase::AwaitingUser>(p) || std::holds_alternative<phase::Eliciting>(p);
  }

  static bool is_busy(const Phase& p) {
    return std::holds_alternative<phase::Eliciting>(p) || std::holds_alternative<phase::AwaitingApi>(p);
  }

 private:
  bool fill_elicited(ConversationState& state, const Dialogue& d, const std::string& slot_name,
                     std::string_view input) const {
    const SlotDef& slot = *d.slot(slot_name);
    std::optional<std::string> value;
    if (slot.is_catalog()) {
      value = matcher_.find_catalog_value(slot.catalog_name(), input);
    } else if (auto n = normalize(input); !n.empty()) {
      value = std::move(n);
    }
    if (value) {
      state.bindings[slot_name] = *value;
      return true;
    }
    // A full restatement of the active dialogue also answers the question.
    if (auto m = matcher_.match(input, d.name); m && m->dialogue == d.name && m->bindings.contains(slot_name)) {
      for (auto& [k, v] : m->bindings) state.bindings[k] = std::move(v);
      return true;
    }
    return false;
  }

  Transition advance(ConversationState state, const Dialogue& d, SimTime now) const {
    for (const auto& slot : d.slots) {
      if (slot.required && !state.bindings.contains(slot.name)) {
        state.phase = phase::Eliciting{d.name, slot.name};
        Elicit ask{slot.name, render_template(slot.elicit_prompt, state.bindings)};
        return emit(std::move(state), std::move(ask), now);
      }
    }
    if (d.api) {
      const ApiDef& api = *schema().api(*d.api);
      Bindings args;
      for (const auto& a : api.args) args[a] = state.bindings.at(a);
      state.phase = phase::AwaitingApi{d.name, api.name, args};
      return emit(std::move(state), ApiCall{api.name, std::move(args)}, now);
    }
    const std::string text = render_template(d.responses.on_complete, state.bindings);
    clear_dialogue(state);
    return emit(std::move(state), EndDialogue{text}, now);
  }

  Transition activate(ConversationState state, const std::string& dialogue, const Bindings& prebound, SimTime now,
                      bool initiated) const {
    const Dialogue& d = *schema().dialogue(dialogue);
    state.active_dialogue = d.name;
    state.bindings.clear();
    state.no_match_count = 0;
    for (const auto& [k, v] : prebound)
      if (d.slot(k)) state.bindings[k] = v;
    for (const auto& slot : d.slots) {
      if (slot.required && !state.bindings.contains(slot.name)) {
        state.phase = phase::Eliciting{d.name, slot.name};
        Elicit ask{slot.name, render_template(slot.elicit_prompt, state.bindings)};
        return emit(std::move(state), std::move(ask), now, initiated);
      }
    }
    const std::string text = render_template(d.responses.on_complete, state.bindings);
    // Dialogues with an API stay active so the user's reply can confirm them.
    if (!d.api) clear_dialogue(state);
    state.phase = phase::AwaitingUser{};
    return emit(std::move(state), Respond{text}, now, initiated);
  }

  Transition give_up(ConversationState state, SimTime now) const {
    const std::string text = no_match_text(state);
    clear_dialogue(state);
    return emit(std::move(state), EndDialogue{text}, now);
  }

  std::string no_match_text(const ConversationState& state) const {
    const Dialogue* d = state.active_dialogue ? schema().dialogue(*state.active_dialogue) : nullptr;
    if (!d) d = &schema().dialogues.front();
    return render_template(d->responses.on_no_match, state.bindings);
  }

  static void clear_dialogue(ConversationState& state) {
    state.active_dialogue.reset();
    state.bindings.clear();
    state.no_match_count = 0;
    state.phase = phase::AwaitingUser{};
  }

  static Transition emit(ConversationState state, RobotAction action, SimTime now, bool initiated = false) {
    state.history.push_back(Turn{Speaker::robot, action, now, initiated});
    return Transition{std::move(state), std::move(action)};
  }

  UtteranceMatcher matcher_;
};

/// Checks turn-taking over a history: no two user turns in a row; a robot
/// turn may follow a robot turn only after an API call or when it opens a
/// robot-initiated dialogue; timestamps never decrease. Returns the first
/// violation, if any.
inline std::optional<std::string> check_turn_alternation(const std::vector<Turn>& history) {
  for (std::size_t i = 0; i < history.size(); ++i) {
    const Turn& t = history[i];
    if (i == 0) {
      if (t.speaker == Speaker::robot && !t.initiated) return "history starts with a robot turn";
      continue;
    }
    const Turn& prev = history[i - 1];
    if (t.at < prev.at) return "timestamp decreases at turn " + std::to_string(i);
    if (t.speaker != prev.speaker) continue;
    if (t.speaker == Speaker::user) return "consecutive user turns at " + std::to_string(i);
    const auto& prev_action = std::get<RobotAction>(prev.content);
    if (!std::holds_alternative<ApiCall>(prev_action) && !t.initiated)
      return "consecutive robot turns at " + std::to_string(i);
  }
  return std::nullopt;
}

inline json action_to_json(const RobotAction& a) {
  json j{{"action", action_name(a)}};
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Elicit>) {
          j["slot"] = v.slot;
          j["text"] = v.prompt;
        } else if constexpr (std::is_same_v<T, ApiCall>) {
          j["api"] = v.api;
          j["args"] = v.args;
        } else {
          j["text"] = v.text;
        }
      },
      a);
  return j;
}

inline json history_to_json(const std::vector<Turn>& history) {
  json out = json::array();
  for (const auto& t : history) {
    json j;
    if (t.speaker == Speaker::user) {
      j = {{"speaker", "user"}, {"text", std::get<std::string>(t.content)}};
    } else {
      j = action_to_json(std::get<RobotAction>(t.content));
      j["speaker"] = "robot";
      if (t.initiated) j["initiated"] = true;
    }
    j["at_ms"] = t.at.ms;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace convoforge
