#pragma once

// Scripted operators driving the gateway in-process, one session per seed,
// with per-session JSONL transcripts and a CSV of metrics.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "convoforge/gateway.hpp"

namespace convoforge {

// --- Operator policy -------------------------------------------------------

enum class Obtain { robot, hand };

struct Goal {
  std::string item;
  Obtain obtain = Obtain::robot;
  bool operator==(const Goal&) const = default;
};

/// What an operator says for one goal in one mode.
struct PhraseSet {
  std::string nominal;
  std::string omitted;                   // request with the item left out
  std::optional<std::string> ambiguous;  // truncated or prefix name
  std::string answer;                    // reply to "which one?"
  bool operator==(const PhraseSet&) const = default;
};

struct Phrasing {
  PhraseSet conversation;
  PhraseSet baseline;
  const PhraseSet& in(Mode m) const { return m == Mode::conversation ? conversation : baseline; }
  bool operator==(const Phrasing&) const = default;
};

enum class NoiseKinds { any, ambiguity_only, omission_only };

struct OperatorPolicy {
  std::vector<Goal> goals;  // flattened assembly plan, step by step
  double error_rate = 0.0;
  NoiseKinds noise = NoiseKinds::any;
  int max_attempts = 3;
  std::map<std::string, Phrasing> phrasing;  // robot goals only
};

class HarnessError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_policy(const OperatorPolicy& p, const TaskConfig& task) {
  if (!(p.error_rate >= 0.0 && p.error_rate <= 1.0)) throw HarnessError("error_rate must be in [0,1]");
  if (p.max_attempts < 1) throw HarnessError("max_attempts must be at least 1");
  for (const auto& [item, _] : p.phrasing)
    if (!task.item(item)) throw HarnessError("phrasing references unknown goal " + item);
  for (const auto& g : p.goals) {
    if (!task.item(g.item)) throw HarnessError("unknown goal " + g.item);
    if (g.obtain == Obtain::robot && !p.phrasing.contains(g.item))
      throw HarnessError("no phrasing for goal " + g.item);
  }
}

/// Prefix stand-ins an operator might say for an item name.
inline const std::map<std::string, std::string>& default_ambiguous_names() {
  static const std::map<std::string, std::string> names{{"bracket", "b"}, {"gear", "gea"}, {"shaft", "s"}};
  return names;
}

/// Components come from the robot, tools are picked by hand.
inline OperatorPolicy default_policy(const TaskConfig& task, double error_rate, NoiseKinds noise = NoiseKinds::any) {
  OperatorPolicy p;
  p.error_rate = error_rate;
  p.noise = noise;
  for (const auto& step : task.steps) {
    for (const auto& name : step.requirements()) {
      const Item* item = task.item(name);
      const bool component = item->kind == ItemKind::component;
      p.goals.push_back({name, component ? Obtain::robot : Obtain::hand});
      if (!component || p.phrasing.contains(name)) continue;
      Phrasing ph;
      ph.conversation = {"bring me the " + name, "bring me a component", std::nullopt, "the " + name};
      ph.baseline = {"bring " + name, "bring", std::nullopt, name};
      if (auto it = default_ambiguous_names().find(name); it != default_ambiguous_names().end()) {
        ph.conversation.ambiguous = "bring me the " + it->second;
        ph.baseline.ambiguous = "bring " + it->second;
      }
      p.phrasing[name] = ph;
    }
  }
  return p;
}

// --- Sessions --------------------------------------------------------------

struct MetricsRecord {
  std::string session_id;
  Mode mode = Mode::conversation;
  std::uint64_t seed = 0;
  SimTime total_time;
  int steps_correct = 0;
  int turns = 0;
  std::string transcript_path;
};

struct SessionRun {
  MetricsRecord metrics;
  SessionLog log;
};

inline std::string session_id_for(Mode mode, std::uint64_t seed) { return std::string(to_string(mode)) + "-" + std::to_string(seed); }

/// Uniform in [0,1) from the top 53 bits; identical on every platform.
inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline int count_turns(const SessionLog& log) {
  int n = 0;
  for (const auto& e : log) {
    if (e.value("entry", "") != "wire") continue;
    const auto& kind = e["msg"]["kind"];
    if (kind == "UserTurn" || kind == "RobotTurn") ++n;
  }
  return n;
}

inline json summary_line(const MetricsRecord& m) {
  return {{"entry", "summary"},     {"session", m.session_id},          {"mode", to_string(m.mode)},
          {"seed", m.seed},         {"steps_correct", m.steps_correct}, {"total_time_ms", m.total_time.ms},
          {"turns", m.turns}};
}

/// JSONL: one line per log entry, then the summary.
inline std::string transcript_text(const SessionRun& run) {
  std::string out;
  for (const auto& e : run.log) out += e.dump() + "\n";
  out += summary_line(run.metrics).dump() + "\n";
  return out;
}

namespace detail {

class Operator {
 public:
  Operator(SkillGateway& gw, const OperatorPolicy& policy, Mode mode, std::string id, std::uint64_t seed)
      : gw_(gw), policy_(policy), mode_(mode), id_(std::move(id)), rng_(seed) {}

  void run() {
    wire::Message start{std::string(wire::kVersion), id_, ++seq_, wire::SessionStart{gw_.schema().name, to_string(mode_)}};
    gw_.open_session(start);

    const TaskConfig& task = gw_.task_config();
    std::size_t g = 0;
    for (const auto& step : task.steps) {
      std::set<std::string> in_hand;
      for (std::size_t r = 0; r < step.requirements().size(); ++r, ++g) {
        const Goal& goal = policy_.goals.at(g);
        if (auto got = obtain(goal)) in_hand.insert(*got);
      }
      gw_.assemble(id_, step.index, in_hand);
      gw_.events(id_)->drain();
    }
  }

 private:
  std::vector<std::string> bench() { return gw_.view(id_).task.workbench(); }

  wire::Message user(const std::string& text) {
    return wire::Message{std::string(wire::kVersion), id_, ++seq_, wire::UserTurn{text}};
  }

  const std::string& first_phrase(const PhraseSet& ps, bool noisy) const {
    if (!noisy) return ps.nominal;
    switch (policy_.noise) {
      case NoiseKinds::ambiguity_only:
        return ps.ambiguous ? *ps.ambiguous : ps.nominal;
      case NoiseKinds::omission_only:
        return ps.omitted;
      case NoiseKinds::any:
        return ps.ambiguous ? *ps.ambiguous : ps.omitted;
    }
    return ps.nominal;
  }

  // The item that landed on the workbench, which the operator takes to be
  // the one asked for without checking.
  std::optional<std::string> obtain(const Goal& goal) {
    // Every goal consumes exactly one draw so both modes see the same noise.
    const bool noisy = unit_draw(rng_) < policy_.error_rate;
    const auto before = bench();
    if (std::find(before.begin(), before.end(), goal.item) != before.end()) return goal.item;
    if (goal.obtain == Obtain::hand) {
      if (gw_.human_pick(id_, goal.item) == PickOutcome::picked) return goal.item;
      return std::nullopt;
    }
    const PhraseSet& ps = policy_.phrasing.at(goal.item).in(mode_);
    std::string text = first_phrase(ps, noisy);
    for (int attempt = 0; attempt < policy_.max_attempts; ++attempt) {
      say(text, ps);
      for (const auto& name : bench())
        if (std::find(before.begin(), before.end(), name) == before.end()) return name;
      text = ps.nominal;
    }
    return std::nullopt;
  }

  void say(const std::string& text, const PhraseSet& ps) {
    auto replies = gw_.user_turn(id_, user(text));
    for (int answers = 0; answers < 2 && !replies.empty(); ++answers) {
      const auto* last = replies.back().as<wire::RobotTurn>();
      if (!last || last->action != "elicit") break;
      replies = gw_.user_turn(id_, user(ps.answer));
    }
  }

  SkillGateway& gw_;
  const OperatorPolicy& policy_;
  Mode mode_;
  std::string id_;
  std::mt19937_64 rng_;
  std::int64_t seq_ = 0;
};

}  // namespace detail

/// One scripted session from SessionStart to the fifth assembly step.
inline SessionRun run_session(const OperatorPolicy& policy, Mode mode, std::shared_ptr<const DialogueSchema> schema,
                              const TaskConfig& task, std::uint64_t seed) {
  check_policy(policy, task);
  GatewayOptions options;
  options.warn = [](std::string_view) {};
  SkillGateway gw(std::move(schema), task, default_handlers(), options);
  const std::string id = session_id_for(mode, seed);
  detail::Operator(gw, policy, mode, id, seed).run();
  const int correct = gw.view(id).task.steps_correct();
  ClosedSession closed = gw.close_session(id, "complete");

  SessionRun run;
  run.metrics.session_id = id;
  run.metrics.mode = mode;
  run.metrics.seed = seed;
  run.metrics.steps_correct = correct;
  run.metrics.turns = count_turns(closed.log);
  for (const auto& e : closed.log) run.metrics.total_time.ms += e["dur_ms"].get<std::int64_t>();
  run.log = std::move(closed.log);
  return run;
}

// --- Experiments -----------------------------------------------------------

struct ModeStats {
  double mean_time_s = 0, stddev_time_s = 0;
  double mean_steps = 0, stddev_steps = 0;
  int sessions = 0;
};

struct ExperimentSummary {
  ModeStats conversation, baseline;
  double relative_time_delta = 0;   // (conversation - baseline) / baseline
  double relative_steps_delta = 0;
};

struct ExperimentResult {
  std::vector<MetricsRecord> records;  // conversation sessions, then baseline
  ExperimentSummary summary;
};

struct ExperimentConfig {
  int n_per_mode = 10;
  double error_rate = 0.0;
  std::uint64_t base_seed = 0;
  NoiseKinds noise = NoiseKinds::any;
  std::optional<std::filesystem::path> transcript_dir;
};

inline ModeStats mode_stats(const std::vector<MetricsRecord>& records, Mode mode) {
  std::vector<double> t, s;
  for (const auto& r : records) {
    if (r.mode != mode) continue;
    t.push_back(static_cast<double>(r.total_time.ms) / 1000.0);
    s.push_back(r.steps_correct);
  }
  ModeStats out;
  out.sessions = static_cast<int>(t.size());
  if (t.empty()) return out;
  auto moments = [](const std::vector<double>& v, double& mean, double& sd) {
    double sum = 0;
    for (double x : v) sum += x;
    mean = sum / static_cast<double>(v.size());
    double sq = 0;
    for (double x : v) sq += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0;
  };
  moments(t, out.mean_time_s, out.stddev_time_s);
  moments(s, out.mean_steps, out.stddev_steps);
  return out;
}

inline ExperimentSummary summarize(const std::vector<MetricsRecord>& records) {
  ExperimentSummary s;
  s.conversation = mode_stats(records, Mode::conversation);
  s.baseline = mode_stats(records, Mode::baseline);
  if (s.baseline.mean_time_s > 0)
    s.relative_time_delta = (s.conversation.mean_time_s - s.baseline.mean_time_s) / s.baseline.mean_time_s;
  if (s.baseline.mean_steps > 0)
    s.relative_steps_delta = (s.conversation.mean_steps - s.baseline.mean_steps) / s.baseline.mean_steps;
  return s;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw HarnessError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw HarnessError("cannot write " + path.string());
}

/// Both modes run on the same seeds base_seed .. base_seed+n-1.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::shared_ptr<const DialogueSchema> schema,
                                       const TaskConfig& task) {
  if (cfg.n_per_mode < 1) throw HarnessError("n_per_mode must be at least 1");
  const OperatorPolicy policy = default_policy(task, cfg.error_rate, cfg.noise);
  if (cfg.transcript_dir) std::filesystem::create_directories(*cfg.transcript_dir);
  ExperimentResult result;
  for (Mode mode : {Mode::conversation, Mode::baseline}) {
    for (int i = 0; i < cfg.n_per_mode; ++i) {
      SessionRun run = run_session(policy, mode, schema, task, cfg.base_seed + static_cast<std::uint64_t>(i));
      if (cfg.transcript_dir) {
        const auto path = *cfg.transcript_dir / (run.metrics.session_id + ".jsonl");
        write_file(path, transcript_text(run));
        run.metrics.transcript_path = path.string();
      }
      result.records.push_back(std::move(run.metrics));
    }
  }
  result.summary = summarize(result.records);
  return result;
}

inline std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string out = "session_id,mode,seed,total_time_s,steps_correct,turns\n";
  for (const auto& r : records) {
    out += r.session_id + "," + to_string(r.mode) + "," + std::to_string(r.seed) + "," + format_seconds(r.total_time) +
           "," + std::to_string(r.steps_correct) + "," + std::to_string(r.turns) + "\n";
  }
  return out;
}

inline json summary_to_json(const ExperimentSummary& s) {
  auto mode = [](const ModeStats& m) {
    return json{{"sessions", m.sessions},
                {"mean_time_s", m.mean_time_s},
                {"stddev_time_s", m.stddev_time_s},
                {"mean_steps_correct", m.mean_steps},
                {"stddev_steps_correct", m.stddev_steps}};
  };
  return {{"conversation", mode(s.conversation)},
          {"baseline", mode(s.baseline)},
          {"relative_time_delta", s.relative_time_delta},
          {"relative_steps_delta", s.relative_steps_delta}};
}

// --- Replay ----------------------------------------------------------------

class CorruptTranscript : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Replay {
  std::vector<std::string> lines;
  json summary;
  SimTime total;
};

namespace detail {

inline std::string render_entry(const json& e) {
  const std::string at = "[" + format_seconds(SimTime{e.at("at_ms").get<std::int64_t>()}) + "] ";
  if (e.at("entry") == "sim") {
    const std::string op = e.at("op");
    if (op == "assemble") {
      std::vector<std::string> used = e.at("using");
      return at + "assemble step " + std::to_string(e.at("step").get<int>()) + " with " +
             (used.empty() ? std::string("nothing") : describe_items(used)) + ": " + e.at("result").get<std::string>();
    }
    if (op == "human_pick")
      return at + "human picks " + e.at("item").get<std::string>() + ": " + e.at("outcome").get<std::string>();
    if (op == "fault") return at + "fault " + e.dump();
    return at + op;
  }
  const wire::Message m = wire::decode(e.at("msg").dump());
  if (const auto* u = m.as<wire::UserTurn>()) return at + "user: " + u->text;
  if (const auto* r = m.as<wire::RobotTurn>()) {
    if (r->action == "api_call") return at + "robot calls " + r->api.value_or("?");
    return at + "robot (" + r->action + "): " + r->text;
  }
  if (const auto* c = m.as<wire::ApiCall>()) return at + "api " + c->api + " " + json(c->args).dump();
  if (const auto* r = m.as<wire::ApiResult>()) return at + "api result " + r->status + " " + json(r->payload).dump();
  if (const auto* ev = m.as<wire::Event>()) return at + "event " + ev->dialogue;
  if (const auto* s = m.as<wire::SessionStart>())
    return at + (e.value("dir", "") == "in" ? "session requested: " : "session opened: ") + s->schema_name + ", " +
           s->mode;
  if (const auto* s = m.as<wire::SessionEnd>()) return at + "session end " + s->reason;
  const auto* err = m.as<wire::Error>();
  return at + "error " + err->code + ": " + err->message;
}

}  // namespace detail

/// Re-renders a transcript and re-checks it: timestamps are contiguous,
/// turns alternate, and durations sum to the recorded total.
inline Replay replay_text(std::string_view text) {
  std::vector<json> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      entries.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      throw CorruptTranscript("line " + std::to_string(n) + " is not JSON");
    }
  }
  if (entries.empty() || !entries.back().is_object() || entries.back().value("entry", "") != "summary")
    throw CorruptTranscript("missing summary line");
  if (text.empty() || text.back() != '\n') throw CorruptTranscript("truncated final line");

  Replay out;
  out.summary = entries.back();
  entries.pop_back();
  enum class Last { none, user, robot_call, robot, event };
  Last last = Last::none;
  try {
    for (const auto& e : entries) {
      const std::int64_t at = e.at("at_ms").get<std::int64_t>();
      const std::int64_t dur = e.at("dur_ms").get<std::int64_t>();
      if (at != out.total.ms)
        throw CorruptTranscript("entry at " + std::to_string(at) + " ms, expected " + std::to_string(out.total.ms));
      if (dur < 0) throw CorruptTranscript("negative duration");
      out.total.ms += dur;
      out.lines.push_back(detail::render_entry(e));
      if (e.at("entry") != "wire") continue;
      const std::string kind = e.at("msg").at("kind");
      if (kind == "UserTurn") {
        if (last == Last::user || last == Last::robot_call)
          throw CorruptTranscript("user turn out of order at " + std::to_string(at) + " ms");
        last = Last::user;
      } else if (kind == "RobotTurn") {
        if (last == Last::robot || last == Last::none)
          throw CorruptTranscript("robot turn without a user turn at " + std::to_string(at) + " ms");
        last = e["msg"]["body"]["action"] == "api_call" ? Last::robot_call : Last::robot;
      } else if (kind == "Event") {
        last = Last::event;
      }
    }
  } catch (const CorruptTranscript&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptTranscript(std::string("malformed entry: ") + e.what());
  }
  if (out.summary.value("total_time_ms", std::int64_t{-1}) != out.total.ms)
    throw CorruptTranscript("durations sum to " + std::to_string(out.total.ms) + " ms, summary says " +
                            out.summary.value("total_time_ms", json(nullptr)).dump());
  return out;
}

inline Replay replay(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptTranscript("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return replay_text(ss.str());
}

/// Recounts correct steps from the item sets used in each assemble entry,
/// ignoring the recorded result.
inline int rescore_steps(const std::vector<json>& entries, const TaskConfig& task) {
  int correct = 0;
  for (const auto& e : entries) {
    if (e.value("entry", "") != "sim" || e.value("op", "") != "assemble") continue;
    const int index = e.at("step").get<int>();
    if (index < 1 || index > static_cast<int>(task.steps.size())) continue;
    const auto used = e.at("using").get<std::set<std::string>>();
    bool ok = true;
    for (const auto& need : task.steps[static_cast<std::size_t>(index - 1)].requirements()) ok = ok && used.contains(need);
    correct += ok;
  }
  return correct;
}

}  // namespace convoforge
