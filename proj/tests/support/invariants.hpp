#pragma once

// Invariant checkers for random interaction sequences, shared by the
// property tests and the acceptance suite.

#include <optional>
#include <random>
#include <string>

#include "convoforge/engine.hpp"
#include "convoforge/gateway.hpp"
#include "convoforge/harness.hpp"
#include "support/generators.hpp"

namespace convoforge::testing {

/// Engine invariants after one transition.
inline std::optional<std::string> engine_violation(const DialogueSchema& s, const Transition& t) {
  if (auto v = check_turn_alternation(t.state.history)) return v;
  if (const auto* el = std::get_if<Elicit>(&t.action)) {
    const auto* ph = std::get_if<phase::Eliciting>(&t.state.phase);
    if (!ph || ph->slot != el->slot) return "elicit without eliciting phase";
    const SlotDef* slot = s.dialogue(ph->dialogue)->slot(el->slot);
    if (!slot || !slot->required) return "elicit for a slot that is not required";
    if (t.state.bindings.contains(el->slot)) return "elicit for a bound slot " + el->slot;
  }
  if (const auto* call = std::get_if<ApiCall>(&t.action)) {
    const auto* ph = std::get_if<phase::AwaitingApi>(&t.state.phase);
    if (!ph) return "api call without awaiting phase";
    const Dialogue& d = *s.dialogue(ph->dialogue);
    for (const auto& slot : d.slots)
      if (slot.required && !t.state.bindings.contains(slot.name)) return "api call with missing " + slot.name;
    for (const auto& arg : s.api(call->api)->args)
      if (call->args.at(arg) != t.state.bindings.at(arg)) return "api argument differs from binding";
  }
  return std::nullopt;
}

/// One random sequence of user turns, API results and initiations driven
/// straight into the engine.
inline std::optional<std::string> engine_sequence_violation(const ConversationEngine& e, std::mt19937_64& rng,
                                                            const std::string& id) {
  static const std::vector<std::string> statuses{"ok", "unavailable", "denied", "error", "strange"};
  static const std::vector<Bindings> payloads{{{"item", "gear"}, {"alternative", "spare gear"}},
                                              {{"item", "shaft"}},
                                              {{"detail", "x"}},
                                              {{"done", "1"}, {"next", "step 2"}, {"suggestion", "bracket"}},
                                              {}};
  ConversationState state = e.start_session(id);
  std::int64_t now = 0;
  const std::size_t length = 1 + pick(rng, 30);
  for (std::size_t i = 0; i < length; ++i) {
    now += 100;
    Transition t;
    if (std::holds_alternative<phase::AwaitingApi>(state.phase)) {
      t = e.apply_api_result(std::move(state), statuses[pick(rng, statuses.size())],
                             payloads[pick(rng, payloads.size())], SimTime{now});
    } else if (pick(rng, 6) == 0) {
      const bool issue = pick(rng, 2) == 0;
      const std::string name = issue ? "ReportIssue" : "OfferSuggestion";
      const Bindings b = issue ? Bindings{{"code", "E" + std::to_string(i)}} : payloads[3];
      if (ConversationEngine::is_busy(state.phase)) {
        try {
          e.initiate_dialogue(state, name, b, SimTime{now});
          return "initiation accepted while busy";
        } catch (const EngineError& err) {
          if (err.code() != "BUSY") return "busy initiation failed with " + err.code();
        }
        continue;
      }
      t = e.initiate_dialogue(std::move(state), name, b, SimTime{now});
    } else {
      t = e.user_turn(std::move(state), random_utterance(rng), SimTime{now});
    }
    if (auto v = engine_violation(e.schema(), t)) return v;
    state = std::move(t.state);
  }
  return std::nullopt;
}

/// One random session through the gateway: user turns, faults, events,
/// picks and assembly. Checks reply shapes while running, then the log.
inline std::optional<std::string> gateway_sequence_violation(Mode mode, std::mt19937_64& rng, const std::string& id) {
  GatewayOptions options;
  options.warn = [](std::string_view) {};
  SkillGateway gw(default_schema(), default_task(), default_handlers(), options);
  gw.open_session(wire::Message{std::string(wire::kVersion), id, 1, wire::SessionStart{"assembly", to_string(mode)}});
  const auto& items = default_task().items;
  std::int64_t seq = 1, last_out = 1;
  auto check_seq = [&](const wire::Message& m) -> std::optional<std::string> {
    if (m.seq <= last_out) return "server seq did not increase";
    last_out = m.seq;
    return std::nullopt;
  };
  const std::size_t length = 1 + pick(rng, 25);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t roll = pick(rng, 10);
    try {
      if (roll < 6) {
        const auto replies =
            gw.user_turn(id, wire::Message{std::string(wire::kVersion), id, ++seq, wire::UserTurn{random_utterance(rng)}});
        if (replies.empty()) return "user turn without a reply";
        if (mode == Mode::baseline && replies.size() != 1) return "baseline sent more than one reply";
        for (std::size_t k = 0; k < replies.size(); ++k) {
          const auto* r = replies[k].as<wire::RobotTurn>();
          if (!r) return "reply is not a robot turn";
          if ((r->action == "api_call") != (k + 1 < replies.size())) return "api call not followed by its outcome";
          if (auto v = check_seq(replies[k])) return v;
        }
      } else if (roll == 6) {
        if (pick(rng, 2))
          gw.inject_fault(id, RobotErrorFault{"E" + std::to_string(i)});
        else
          gw.inject_fault(id, ItemUnavailableFault{items[pick(rng, items.size())].name});
      } else if (roll == 7) {
        gw.post_event(id, pick(rng, 2) ? "ReportIssue" : "OfferSuggestion", {{"code", "E"}});
      } else if (roll == 8) {
        gw.human_pick(id, items[pick(rng, items.size())].name);
      } else {
        const auto bench = gw.view(id).task.workbench();
        gw.assemble(id, 1 + static_cast<int>(pick(rng, 5)), std::set<std::string>(bench.begin(), bench.end()));
      }
    } catch (const GatewayError& e) {
      if (e.code() != "STEP_FINISHED" && e.code() != "NOT_ON_WORKBENCH") return "unexpected " + e.code() + ": " + e.what();
    }
    for (const auto& m : gw.events(id)->drain()) {
      if (mode == Mode::baseline) return "baseline session produced an event";
      if (auto v = check_seq(m)) return v;
    }
  }
  const SimTime now = gw.view(id).now;
  ClosedSession closed = gw.close_session(id);
  SessionRun run;
  run.metrics.session_id = id;
  run.metrics.mode = mode;
  run.log = closed.log;
  for (const auto& e : run.log) run.metrics.total_time.ms += e["dur_ms"].get<std::int64_t>();
  if (run.metrics.total_time != now) return "log durations do not sum to the session clock";
  try {
    replay_text(transcript_text(run));
  } catch (const CorruptTranscript& e) {
    return std::string("log check: ") + e.what();
  }
  return std::nullopt;
}

}  // namespace convoforge::testing
