#pragma once

// Back-end handlers: dialogue API calls become simulator actions, and
// simulator events become robot-initiated dialogues.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "convoforge/matcher.hpp"
#include "convoforge/schema.hpp"
#include "convoforge/task.hpp"

namespace convoforge {

struct ApiResult {
  std::string status;  // ok | unavailable | denied | error
  Bindings payload;
  bool operator==(const ApiResult&) const = default;
};

struct ApiHandler {
  std::function<ApiResult(const Bindings& args, TaskState& task, SimClock& clock)> run;
  /// Payload keys emitted per status; checked against route templates.
  std::map<std::string, std::set<std::string>> payload_keys;
};

using ApiHandlerTable = std::map<std::string, ApiHandler>;

/// "a", "a and b", "a, b and c".
inline std::string describe_items(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? " and " : ", ";
    out += items[i];
  }
  return out;
}

/// done / next / suggestion, recomputed from step statuses.
inline Bindings status_payload(const TaskState& task) {
  Bindings p;
  p["done"] = std::to_string(task.steps_finished());
  if (const AssemblyStep* next = task.next_step()) {
    p["next"] = "step " + std::to_string(next->index);
    p["suggestion"] = describe_items(next->requirements());
  } else {
    p["next"] = "no further step";
    p["suggestion"] = "nothing else";
  }
  return p;
}

namespace handlers {

inline ApiResult fetch(const std::string& item, TaskState& task, SimClock& clock) {
  if (!task.config().item(item)) return {"error", {{"item", item}, {"detail", "I do not know that part."}}};
  const FetchOutcome out = task.robot_fetch(item, clock);
  switch (out.kind) {
    case FetchOutcome::Kind::delivered:
      return {"ok", {{"item", item}}};
    case FetchOutcome::Kind::access_denied:
      return {"denied", {{"item", item}}};
    case FetchOutcome::Kind::unavailable:
      if (out.alternative) return {"unavailable", {{"item", item}, {"alternative", *out.alternative}}};
      return {"error", {{"item", item}, {"detail", "It is not available and I have no alternative."}}};
  }
  return {"error", {{"item", item}, {"detail", "unexpected outcome"}}};
}

inline ApiResult fetch_item(const Bindings& args, TaskState& task, SimClock& clock) {
  return fetch(args.at("item"), task, clock);
}

inline ApiResult confirm_alternative(const Bindings& args, TaskState& task, SimClock& clock) {
  ApiResult r = fetch(args.at("alternative"), task, clock);
  if (r.status == "ok") return r;
  const std::string item = args.at("alternative");
  return {"error", {{"item", item}, {"detail", "It is not available either."}}};
}

inline ApiResult query_status(const Bindings&, TaskState& task, SimClock&) { return {"ok", status_payload(task)}; }

inline ApiResult report_done(const Bindings&, TaskState& task, SimClock&) { return {"ok", status_payload(task)}; }

inline ApiResult request_assistance(const Bindings&, TaskState& task, SimClock&) {
  const AssemblyStep* next = task.next_step();
  if (!next) return {"ok", {{"detail", "All steps are finished. Nothing else is needed."}}};
  std::string detail = "Step " + std::to_string(next->index) + " needs " + describe_items(next->requirements()) + ".";
  std::vector<std::string> out_of_reach;
  for (const auto& name : next->requirements()) {
    const ItemState& st = task.item(name);
    if (st.location == kWorkbench) continue;
    if (task.config().area(st.location)->access == Access::robot_only) out_of_reach.push_back(name);
  }
  if (out_of_reach.empty())
    detail += " Everything is within your reach.";
  else
    detail += " I can bring you the " + describe_items(out_of_reach) + ".";
  return {"ok", {{"detail", detail}}};
}

}  // namespace handlers

inline ApiHandlerTable default_handlers() {
  const std::set<std::string> status_keys{"done", "next", "suggestion"};
  ApiHandlerTable t;
  t["fetch_item"] = {handlers::fetch_item,
                     {{"ok", {"item"}},
                      {"unavailable", {"item", "alternative"}},
                      {"denied", {"item"}},
                      {"error", {"item", "detail"}}}};
  t["confirm_alternative"] = {handlers::confirm_alternative, {{"ok", {"item"}}, {"error", {"item", "detail"}}}};
  t["query_status"] = {handlers::query_status, {{"ok", status_keys}, {"error", {"detail"}}}};
  t["report_done"] = {handlers::report_done, {{"ok", status_keys}, {"error", {"detail"}}}};
  t["request_assistance"] = {handlers::request_assistance, {{"ok", {"detail"}}, {"error", {"detail"}}}};
  return t;
}

/// Never throws: unknown APIs and simulator errors come back as "error".
inline ApiResult handle_api(const ApiHandlerTable& table, std::string_view api, const Bindings& args, TaskState& task,
                            SimClock& clock) {
  auto it = table.find(std::string(api));
  if (it == table.end()) return {"error", {{"detail", "unknown api " + std::string(api)}}};
  try {
    return it->second.run(args, task, clock);
  } catch (const std::exception& e) {
    return {"error", {{"detail", e.what()}}};
  }
}

/// Startup cross-checks: every API has one handler, and every respond
/// template only references keys the handler emits for that status.
inline std::vector<std::string> check_handlers(const DialogueSchema& schema, const ApiHandlerTable& table) {
  std::vector<std::string> problems;
  for (const auto& api : schema.apis) {
    auto it = table.find(api.name);
    if (it == table.end()) {
      problems.push_back("no handler for api " + api.name);
      continue;
    }
    for (const auto& [status, route] : api.routes) {
      const auto* respond = std::get_if<RespondRoute>(&route);
      if (!respond) continue;
      auto keys = it->second.payload_keys.find(status);
      for (const auto& var : template_variables(respond->text)) {
        if (keys == it->second.payload_keys.end() || !keys->second.contains(var))
          problems.push_back(api.name + "." + status + " template uses {" + var + "} missing from payload");
      }
    }
  }
  return problems;
}

/// Task items must be catalog values of the schema.
inline std::vector<std::string> check_task_against_schema(const DialogueSchema& schema, const TaskConfig& task) {
  std::vector<std::string> problems;
  for (const auto& item : task.items) {
    bool found = false;
    for (const auto& c : schema.catalogs) found = found || c.find(item.name) != nullptr;
    if (!found) problems.push_back("item " + item.name + " is not a catalog value");
  }
  return problems;
}

struct Initiation {
  std::string dialogue;
  Bindings bindings;
  bool operator==(const Initiation&) const = default;
};

struct EventRouting {
  std::string issue_dialogue = "ReportIssue";
  std::string suggestion_dialogue = "OfferSuggestion";
};

/// Robot errors open the issue dialogue; step completions open the
/// suggestion dialogue with the next step's requirements.
inline std::optional<Initiation> on_sim_event(const SimEvent& event, const TaskState& task,
                                              const EventRouting& routing = {}) {
  switch (event.kind) {
    case SimEvent::Kind::robot_error:
      return Initiation{routing.issue_dialogue, {{"code", event.detail}}};
    case SimEvent::Kind::step_completed:
      return Initiation{routing.suggestion_dialogue, status_payload(task)};
    case SimEvent::Kind::item_unavailable:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace convoforge
