#pragma once

// Collaborative assembly world: three areas with access permissions, items,
// five assembly steps and a simulated clock.

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "convoforge/sim_time.hpp"

namespace convoforge {

inline constexpr std::size_t kAreaCount = 3;
inline constexpr std::size_t kStepCount = 5;
inline constexpr std::string_view kWorkbench = "workbench";

enum class Access { robot_only, shared };
enum class ItemKind { component, tool };
enum class StepStatus { pending, in_progress, done_correct, done_incorrect };

inline const char* to_string(StepStatus s) {
  switch (s) {
    case StepStatus::pending: return "pending";
    case StepStatus::in_progress: return "in_progress";
    case StepStatus::done_correct: return "done_correct";
    case StepStatus::done_incorrect: return "done_incorrect";
  }
  return "?";
}

struct Area {
  std::string name;
  Access access = Access::shared;
  bool operator==(const Area&) const = default;
};

struct Item {
  std::string name;
  ItemKind kind = ItemKind::component;
  std::string area;
  bool available = true;
  bool operator==(const Item&) const = default;
};

struct AssemblyStep {
  int index = 0;
  std::vector<std::string> required_components;
  std::optional<std::string> required_tool;
  bool operator==(const AssemblyStep&) const = default;

  /// Components followed by the tool, if any.
  std::vector<std::string> requirements() const {
    auto all = required_components;
    if (required_tool) all.push_back(*required_tool);
    return all;
  }
};

struct ActionDurations {
  SimTime robot_fetch = SimTime{8000};
  SimTime robot_deliver = SimTime{4000};
  SimTime human_pick = SimTime{3000};
  SimTime human_assemble = SimTime{20000};
  SimTime speech_per_token = SimTime{400};
  bool operator==(const ActionDurations&) const = default;
};

struct TaskConfig {
  std::vector<Area> areas;
  std::vector<Item> items;
  std::vector<AssemblyStep> steps;
  ActionDurations durations;
  bool operator==(const TaskConfig&) const = default;

  const Item* item(std::string_view name) const {
    for (const auto& i : items)
      if (i.name == name) return &i;
    return nullptr;
  }
  const Area* area(std::string_view name) const {
    for (const auto& a : areas)
      if (a.name == name) return &a;
    return nullptr;
  }
  bool required_by_any_step(std::string_view name) const {
    for (const auto& s : steps)
      for (const auto& r : s.requirements())
        if (r == name) return true;
    return false;
  }
};

class TaskError : public std::runtime_error {
 public:
  TaskError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

namespace detail {

inline double positive_seconds(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number() || v.get<double>() <= 0.0)
    throw TaskError("INVALID_TASK", std::string("duration ") + key + " must be a positive number");
  return v.get<double>();
}

inline void only_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw TaskError("INVALID_TASK", std::string(where) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      throw TaskError("INVALID_TASK", std::string("unknown key \"") + it.key() + "\" in " + where);
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, const char* where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw TaskError("INVALID_TASK", std::string("missing or mistyped \"") + key + "\" in " + where);
  }
}

}  // namespace detail

inline void validate_task(const TaskConfig& t) {
  if (t.areas.size() != kAreaCount) throw TaskError("INVALID_TASK", "exactly 3 areas required");
  if (t.steps.size() != kStepCount) throw TaskError("INVALID_TASK", "exactly 5 steps required");
  std::set<std::string> names;
  bool robot_only = false, shared = false;
  for (const auto& a : t.areas) {
    if (a.name.empty() || a.name == kWorkbench) throw TaskError("INVALID_TASK", "invalid area name \"" + a.name + "\"");
    if (!names.insert(a.name).second) throw TaskError("INVALID_TASK", "duplicate area " + a.name);
    (a.access == Access::robot_only ? robot_only : shared) = true;
  }
  if (!robot_only || !shared)
    throw TaskError("INVALID_TASK", "at least one robot_only and one shared area required");
  names.clear();
  for (const auto& i : t.items) {
    if (i.name.empty()) throw TaskError("INVALID_TASK", "empty item name");
    if (!names.insert(i.name).second) throw TaskError("INVALID_TASK", "duplicate item " + i.name);
    if (!t.area(i.area)) throw TaskError("INVALID_TASK", "item " + i.name + " placed in unknown area " + i.area);
  }
  for (std::size_t k = 0; k < t.steps.size(); ++k) {
    const auto& s = t.steps[k];
    if (s.index != static_cast<int>(k) + 1) throw TaskError("INVALID_TASK", "steps must be numbered 1..5 in order");
    if (s.required_components.empty())
      throw TaskError("INVALID_TASK", "step " + std::to_string(s.index) + " requires no component");
    for (const auto& c : s.required_components) {
      const Item* item = t.item(c);
      if (!item) throw TaskError("INVALID_TASK", "step " + std::to_string(s.index) + " references unknown item " + c);
      if (item->kind != ItemKind::component)
        throw TaskError("INVALID_TASK", "step " + std::to_string(s.index) + ": " + c + " is not a component");
    }
    if (s.required_tool) {
      const Item* tool = t.item(*s.required_tool);
      if (!tool)
        throw TaskError("INVALID_TASK", "step " + std::to_string(s.index) + " references unknown item " + *s.required_tool);
      if (tool->kind != ItemKind::tool)
        throw TaskError("INVALID_TASK", "step " + std::to_string(s.index) + ": " + *s.required_tool + " is not a tool");
    }
  }
}

inline TaskConfig load_task(std::string_view text) {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw TaskError("INVALID_TASK", std::string("syntax: ") + e.what());
  }
  detail::only_keys(root, {"areas", "items", "steps", "durations"}, "task");
  TaskConfig t;
  for (const auto& ja : detail::get_field<json>(root, "areas", "task")) {
    detail::only_keys(ja, {"name", "access"}, "area");
    Area a;
    a.name = detail::get_field<std::string>(ja, "name", "area");
    const auto access = detail::get_field<std::string>(ja, "access", "area");
    if (access == "robot_only")
      a.access = Access::robot_only;
    else if (access == "shared")
      a.access = Access::shared;
    else
      throw TaskError("INVALID_TASK", "unknown access \"" + access + "\"");
    t.areas.push_back(std::move(a));
  }
  for (const auto& ji : detail::get_field<json>(root, "items", "task")) {
    detail::only_keys(ji, {"name", "kind", "area", "available"}, "item");
    Item i;
    i.name = detail::get_field<std::string>(ji, "name", "item");
    const auto kind = detail::get_field<std::string>(ji, "kind", "item");
    if (kind == "component")
      i.kind = ItemKind::component;
    else if (kind == "tool")
      i.kind = ItemKind::tool;
    else
      throw TaskError("INVALID_TASK", "unknown item kind \"" + kind + "\"");
    i.area = detail::get_field<std::string>(ji, "area", "item");
    i.available = ji.contains("available") ? detail::get_field<bool>(ji, "available", "item") : true;
    t.items.push_back(std::move(i));
  }
  for (const auto& js : detail::get_field<json>(root, "steps", "task")) {
    detail::only_keys(js, {"index", "components", "tool"}, "step");
    AssemblyStep s;
    s.index = detail::get_field<int>(js, "index", "step");
    s.required_components = detail::get_field<std::vector<std::string>>(js, "components", "step");
    if (js.contains("tool") && !js.at("tool").is_null()) s.required_tool = detail::get_field<std::string>(js, "tool", "step");
    t.steps.push_back(std::move(s));
  }
  if (root.contains("durations")) {
    const json& jd = root.at("durations");
    detail::only_keys(jd, {"robot_fetch_s", "robot_deliver_s", "human_pick_s", "human_assemble_s", "speech_s_per_token"},
                      "durations");
    auto& d = t.durations;
    d.robot_fetch = SimTime::from_seconds(detail::positive_seconds(jd, "robot_fetch_s", d.robot_fetch.seconds()));
    d.robot_deliver = SimTime::from_seconds(detail::positive_seconds(jd, "robot_deliver_s", d.robot_deliver.seconds()));
    d.human_pick = SimTime::from_seconds(detail::positive_seconds(jd, "human_pick_s", d.human_pick.seconds()));
    d.human_assemble = SimTime::from_seconds(detail::positive_seconds(jd, "human_assemble_s", d.human_assemble.seconds()));
    d.speech_per_token =
        SimTime::from_seconds(detail::positive_seconds(jd, "speech_s_per_token", d.speech_per_token.seconds()));
    if (d.robot_fetch.ms <= 0 || d.robot_deliver.ms <= 0 || d.human_pick.ms <= 0 || d.human_assemble.ms <= 0 ||
        d.speech_per_token.ms <= 0)
      throw TaskError("INVALID_TASK", "durations must be at least one millisecond");
  }
  validate_task(t);
  return t;
}

// --- Runtime state ---------------------------------------------------------

struct ItemState {
  std::string location;  // area name or "workbench"
  bool available = true;
  bool consumed = false;  // assembled into a finished step
  bool operator==(const ItemState&) const = default;
};

struct FetchOutcome {
  enum class Kind { delivered, unavailable, access_denied } kind = Kind::delivered;
  std::optional<std::string> alternative;
  bool operator==(const FetchOutcome&) const = default;
};

enum class PickOutcome { picked, access_denied, unavailable };

inline const char* to_string(FetchOutcome::Kind k) {
  switch (k) {
    case FetchOutcome::Kind::delivered: return "delivered";
    case FetchOutcome::Kind::unavailable: return "unavailable";
    case FetchOutcome::Kind::access_denied: return "access_denied";
  }
  return "?";
}

inline const char* to_string(PickOutcome k) {
  switch (k) {
    case PickOutcome::picked: return "picked";
    case PickOutcome::access_denied: return "access_denied";
    case PickOutcome::unavailable: return "unavailable";
  }
  return "?";
}

struct ItemUnavailableFault {
  std::string item;
};
struct RobotErrorFault {
  std::string code;
};
using Fault = std::variant<ItemUnavailableFault, RobotErrorFault>;

struct SimEvent {
  enum class Kind { robot_error, item_unavailable, step_completed } kind = Kind::robot_error;
  std::string detail;  // error code or item name
  int step = 0;        // completed step index
  bool operator==(const SimEvent&) const = default;
};

class TaskState {
 public:
  explicit TaskState(TaskConfig config) : config_(std::move(config)) {
    for (const auto& i : config_.items) items_[i.name] = ItemState{i.area, i.available, false};
    steps_.assign(config_.steps.size(), StepStatus::pending);
  }

  const TaskConfig& config() const { return config_; }
  const ItemState& item(std::string_view name) const { return items_.at(known(name)); }
  StepStatus step_status(int index) const { return steps_.at(step_slot(index)); }

  /// Unconsumed items currently on the workbench, in declaration order.
  std::vector<std::string> workbench() const {
    std::vector<std::string> out;
    for (const auto& i : config_.items) {
      const auto& st = items_.at(i.name);
      if (st.location == kWorkbench && !st.consumed) out.push_back(i.name);
    }
    return out;
  }

  int steps_finished() const {
    return static_cast<int>(std::count_if(steps_.begin(), steps_.end(), [](StepStatus s) {
      return s == StepStatus::done_correct || s == StepStatus::done_incorrect;
    }));
  }
  int steps_correct() const {
    return static_cast<int>(std::count(steps_.begin(), steps_.end(), StepStatus::done_correct));
  }
  /// First step that is not finished, if any.
  const AssemblyStep* next_step() const {
    for (std::size_t k = 0; k < steps_.size(); ++k)
      if (steps_[k] == StepStatus::pending || steps_[k] == StepStatus::in_progress) return &config_.steps[k];
    return nullptr;
  }

  /// Available, unconsumed item of the same kind not needed by any step,
  /// nearest to `name` in declaration order (earlier wins ties).
  std::optional<std::string> alternative_for(std::string_view name) const {
    const Item* target = config_.item(name);
    std::size_t target_index = static_cast<std::size_t>(target - config_.items.data());
    std::optional<std::string> best;
    std::size_t best_distance = config_.items.size() + 1;
    for (std::size_t k = 0; k < config_.items.size(); ++k) {
      const Item& cand = config_.items[k];
      const ItemState& st = items_.at(cand.name);
      if (k == target_index || cand.kind != target->kind || !st.available || st.consumed) continue;
      if (config_.required_by_any_step(cand.name)) continue;
      const std::size_t distance = k > target_index ? k - target_index : target_index - k;
      if (distance < best_distance) {
        best_distance = distance;
        best = cand.name;
      }
    }
    return best;
  }

  /// The robot may reach every area.
  FetchOutcome robot_fetch(std::string_view name, SimClock& clock) {
    ItemState& st = items_.at(known(name));
    if (st.consumed || !st.available) return FetchOutcome{FetchOutcome::Kind::unavailable, alternative_for(name)};
    if (st.location == kWorkbench) return FetchOutcome{};
    st.location = std::string(kWorkbench);
    clock.advance(config_.durations.robot_fetch + config_.durations.robot_deliver);
    return FetchOutcome{};
  }

  PickOutcome human_pick(std::string_view name, SimClock& clock) {
    ItemState& st = items_.at(known(name));
    if (st.location != kWorkbench && config_.area(st.location)->access == Access::robot_only)
      return PickOutcome::access_denied;
    if (st.consumed || !st.available) return PickOutcome::unavailable;
    if (st.location == kWorkbench) return PickOutcome::picked;
    st.location = std::string(kWorkbench);
    clock.advance(config_.durations.human_pick);
    return PickOutcome::picked;
  }

  /// Correct iff `using` covers the step's components and tool. Components
  /// used are consumed; tools stay on the workbench.
  StepStatus assemble_step(int index, const std::set<std::string>& used, SimClock& clock) {
    StepStatus& status = steps_.at(step_slot(index));
    if (status == StepStatus::done_correct || status == StepStatus::done_incorrect)
      throw TaskError("STEP_FINISHED", "step " + std::to_string(index) + " is already finished");
    for (const auto& name : used) {
      const ItemState& st = items_.at(known(name));
      if (st.location != kWorkbench || st.consumed)
        throw TaskError("NOT_ON_WORKBENCH", name + " is not on the workbench");
    }
    status = StepStatus::in_progress;
    const AssemblyStep& step = config_.steps[step_slot(index)];
    bool correct = std::all_of(step.required_components.begin(), step.required_components.end(),
                               [&](const std::string& c) { return used.contains(c); });
    if (step.required_tool && !used.contains(*step.required_tool)) correct = false;
    for (const auto& name : used)
      if (config_.item(name)->kind == ItemKind::component) items_[name].consumed = true;
    clock.advance(config_.durations.human_assemble);
    status = correct ? StepStatus::done_correct : StepStatus::done_incorrect;
    return status;
  }

  SimEvent inject_fault(const Fault& fault) {
    if (const auto* f = std::get_if<ItemUnavailableFault>(&fault)) {
      items_.at(known(f->item)).available = false;
      return SimEvent{SimEvent::Kind::item_unavailable, f->item, 0};
    }
    return SimEvent{SimEvent::Kind::robot_error, std::get<RobotErrorFault>(fault).code, 0};
  }

 private:
  const std::string& known(std::string_view name) const {
    const Item* i = config_.item(name);
    if (!i) throw TaskError("UNKNOWN_ITEM", "unknown item " + std::string(name));
    return i->name;
  }

  std::size_t step_slot(int index) const {
    if (index < 1 || index > static_cast<int>(steps_.size()))
      throw TaskError("UNKNOWN_STEP", "no step " + std::to_string(index));
    return static_cast<std::size_t>(index - 1);
  }

  TaskConfig config_;
  std::map<std::string, ItemState> items_;
  std::vector<StepStatus> steps_;
};

}  // namespace convoforge
