#pragma once

// Request-response comparison condition: one command, one reply. No slot
// elicitation, no clarification, no chained dialogues.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "convoforge/normalize.hpp"
#include "convoforge/orchestrator.hpp"
#include "convoforge/task.hpp"

namespace convoforge::baseline {

enum class Verb { bring, status, help, done };

struct Command {
  Verb verb = Verb::help;
  std::optional<std::string> argument;
  bool operator==(const Command&) const = default;
};

struct Reject {
  std::string reason;
  bool operator==(const Reject&) const = default;
};

using ParseResult = std::variant<Command, Reject>;

inline constexpr std::string_view kRejectText = "Unknown command.";
inline constexpr std::string_view kHelpText = "Commands: bring <item>, status, help, done.";

/// `<verb> [argument]`; bring takes an argument, the others take none.
inline ParseResult parse_command(std::string_view input) {
  const auto tokens = tokenize(input);
  if (tokens.empty()) return Reject{"empty command"};
  const std::string& head = tokens.front();
  std::vector<std::string> rest(tokens.begin() + 1, tokens.end());
  if (head == "bring") {
    if (rest.empty()) return Reject{"bring needs an item"};
    return Command{Verb::bring, join(rest)};
  }
  Verb verb;
  if (head == "status")
    verb = Verb::status;
  else if (head == "help")
    verb = Verb::help;
  else if (head == "done")
    verb = Verb::done;
  else
    return Reject{"unknown verb " + head};
  if (!rest.empty()) return Reject{head + " takes no argument"};
  return Command{verb, std::nullopt};
}

/// Exact name first; otherwise the first item in declaration order whose
/// name, or any word-suffix of it, starts with the argument.
inline std::optional<std::string> resolve_item(const TaskConfig& task, std::string_view argument) {
  for (const auto& item : task.items)
    if (normalize(item.name) == argument) return item.name;
  for (const auto& item : task.items) {
    const std::string name = normalize(item.name);
    for (std::size_t pos = 0; pos != std::string::npos;) {
      if (name.compare(pos, argument.size(), argument) == 0) return item.name;
      pos = name.find(' ', pos);
      if (pos != std::string::npos) ++pos;
    }
  }
  return std::nullopt;
}

inline std::string execute_command(const Command& cmd, TaskState& task, SimClock& clock) {
  switch (cmd.verb) {
    case Verb::bring: {
      auto item = resolve_item(task.config(), *cmd.argument);
      if (!item) return "unknown item " + *cmd.argument;
      const FetchOutcome out = task.robot_fetch(*item, clock);
      if (out.kind == FetchOutcome::Kind::delivered) return "delivered " + *item;
      return *item + " not available";
    }
    case Verb::status: {
      const Bindings p = status_payload(task);
      return "done " + p.at("done") + " of 5, next " + p.at("next");
    }
    case Verb::help:
      return std::string(kHelpText);
    case Verb::done:
      return "ok";
  }
  return std::string(kRejectText);
}

/// One user message in, exactly one robot message out.
inline std::string respond(std::string_view input, TaskState& task, SimClock& clock) {
  const ParseResult parsed = parse_command(input);
  if (std::holds_alternative<Reject>(parsed)) return std::string(kRejectText);
  return execute_command(std::get<Command>(parsed), task, clock);
}

}  // namespace convoforge::baseline
