// convoforge: serve, validate, experiment, replay.
//
// Exit codes: 0 success, 1 validation or runtime error, 2 usage error.
// Errors are written to stderr as one JSON object per line.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "convoforge/default_fixtures.hpp"
#include "convoforge/harness.hpp"
#include "convoforge/http_service.hpp"
#include "convoforge/schema.hpp"
#include "convoforge/task.hpp"

namespace cf = convoforge;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

int report(const cf::json& error, int code) {
  std::cerr << error.dump() << '\n';
  return code;
}

int report(const std::string& code, const std::string& message, int exit_code = kFailure) {
  return report(cf::json{{"error", code}, {"message", message}}, exit_code);
}

int report(const cf::SchemaError& e) {
  cf::json j{{"error", "INVALID_SCHEMA"}, {"rule", e.rule()}, {"element", e.element()}, {"message", e.what()}};
  if (e.line() > 0) {
    j["line"] = e.line();
    j["column"] = e.column();
  }
  return report(j, kFailure);
}

struct Configs {
  std::shared_ptr<const cf::DialogueSchema> schema;
  cf::TaskConfig task;
};

Configs load(const std::string& schema_path, const std::string& task_path) {
  Configs c;
  c.schema = std::make_shared<const cf::DialogueSchema>(
      cf::parse_schema(schema_path.empty() ? std::string(cf::defaults::kSchemaJson) : cf::read_file(schema_path)));
  c.task = cf::load_task(task_path.empty() ? std::string(cf::defaults::kTaskJson) : cf::read_file(task_path));
  return c;
}

cf::HttpService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

int serve(const std::string& schema_path, const std::string& task_path, const std::string& host, int port) {
  Configs c = load(schema_path, task_path);
  cf::SkillGateway gateway(c.schema, std::move(c.task));
  cf::HttpService service(gateway);
  const int bound = service.bind(host, port);
  if (bound < 0) return report("BIND_FAILED", "cannot listen on " + host + ":" + std::to_string(port));
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << cf::json{{"listening", host + ":" + std::to_string(bound)}, {"schema", gateway.schema().name}}.dump()
            << std::endl;
  service.listen();
  g_service = nullptr;
  return kOk;
}

int validate(const std::string& schema_path, const std::string& task_path) {
  cf::json out{{"ok", true}};
  std::shared_ptr<const cf::DialogueSchema> schema;
  if (!schema_path.empty()) {
    schema = std::make_shared<const cf::DialogueSchema>(cf::parse_schema(cf::read_file(schema_path)));
    out["schema"] = {{"name", schema->name}, {"dialogues", schema->dialogues.size()}, {"apis", schema->apis.size()}};
  }
  if (!task_path.empty()) {
    const cf::TaskConfig task = cf::load_task(cf::read_file(task_path));
    out["task"] = {{"areas", task.areas.size()}, {"items", task.items.size()}, {"steps", task.steps.size()}};
    if (schema) {
      auto problems = cf::check_task_against_schema(*schema, task);
      if (!problems.empty()) return report("INVALID_TASK", problems.front());
    }
  }
  if (schema) {
    auto problems = cf::check_handlers(*schema, cf::default_handlers());
    if (!problems.empty()) return report("INVALID_SCHEMA", problems.front());
  }
  std::cout << out.dump() << '\n';
  return kOk;
}

int experiment(const cf::ExperimentConfig& cfg, const std::string& schema_path, const std::string& task_path,
               const std::string& out_path) {
  Configs c = load(schema_path, task_path);
  const cf::ExperimentResult result = cf::run_experiment(cfg, c.schema, c.task);
  const std::string csv = cf::metrics_csv(result.records);
  if (out_path.empty()) {
    std::cout << csv;
    return kOk;
  }
  cf::write_file(out_path, csv);
  std::cout << cf::summary_to_json(result.summary).dump() << '\n';
  return kOk;
}

int replay(const std::string& path, const std::string& task_path) {
  const cf::Replay r = cf::replay(path);
  const cf::TaskConfig task = cf::load_task(task_path.empty() ? std::string(cf::defaults::kTaskJson) : cf::read_file(task_path));

  std::vector<cf::json> entries;
  {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) entries.push_back(cf::json::parse(line));
  }
  const int rescored = cf::rescore_steps(entries, task);
  const int recorded = r.summary.value("steps_correct", -1);
  if (rescored != recorded)
    throw cf::CorruptTranscript("rescored " + std::to_string(rescored) + " correct steps, summary says " +
                                std::to_string(recorded));

  for (const auto& l : r.lines) std::cout << l << '\n';
  std::cout << "total " << cf::format_seconds(r.total) << " s, " << rescored << " of " << task.steps.size()
            << " steps correct\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conversational skill gateway for a simulated collaborative assembly task"};
  app.require_subcommand(1);

  std::string schema_path, task_path;

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP gateway");
  std::string host = "0.0.0.0";
  int port = cf::port_from_env();
  serve_cmd->add_option("--schema", schema_path, "Dialogue schema JSON (default: built-in assembly schema)");
  serve_cmd->add_option("--task", task_path, "Task configuration JSON (default: built-in assembly task)");
  serve_cmd->add_option("--host", host, "Address to bind")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port to bind, 0 for any (default: $CONVOFORGE_PORT or 8732)")
      ->check(CLI::Range(0, 65535));

  auto* validate_cmd = app.add_subcommand("validate", "Check a schema and/or task configuration");
  validate_cmd->add_option("--schema", schema_path, "Dialogue schema JSON");
  validate_cmd->add_option("--task", task_path, "Task configuration JSON");

  auto* experiment_cmd = app.add_subcommand("experiment", "Run scripted sessions in both modes and write metrics CSV");
  cf::ExperimentConfig cfg;
  std::string out_path, transcript_dir, noise = "any";
  experiment_cmd->add_option("--n", cfg.n_per_mode, "Sessions per mode")->capture_default_str()->check(CLI::PositiveNumber);
  experiment_cmd->add_option("--error-rate", cfg.error_rate, "Probability of a noisy request")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  experiment_cmd->add_option("--seed", cfg.base_seed, "Base seed; session i uses seed+i")->capture_default_str();
  experiment_cmd->add_option("--noise", noise, "Noise kinds")
      ->check(CLI::IsMember({"any", "ambiguity", "omission"}))
      ->capture_default_str();
  experiment_cmd->add_option("--out", out_path, "CSV output path (default: stdout)");
  experiment_cmd->add_option("--transcripts", transcript_dir, "Directory for per-session JSONL transcripts");
  experiment_cmd->add_option("--schema", schema_path, "Dialogue schema JSON");
  experiment_cmd->add_option("--task", task_path, "Task configuration JSON");

  auto* replay_cmd = app.add_subcommand("replay", "Render and re-check a session transcript");
  std::string transcript;
  replay_cmd->add_option("transcript", transcript, "JSONL transcript")->required();
  replay_cmd->add_option("--task", task_path, "Task configuration used for rescoring");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("USAGE", e.what(), kUsage);
  }

  try {
    if (*serve_cmd) return serve(schema_path, task_path, host, port);
    if (*validate_cmd) {
      if (schema_path.empty() && task_path.empty()) return report("USAGE", "validate needs --schema or --task", kUsage);
      return validate(schema_path, task_path);
    }
    if (*experiment_cmd) {
      cfg.noise = noise == "ambiguity" ? cf::NoiseKinds::ambiguity_only
                  : noise == "omission" ? cf::NoiseKinds::omission_only
                                        : cf::NoiseKinds::any;
      if (!transcript_dir.empty()) cfg.transcript_dir = transcript_dir;
      return experiment(cfg, schema_path, task_path, out_path);
    }
    if (*replay_cmd) return replay(transcript, task_path);
  } catch (const cf::SchemaError& e) {
    return report(e);
  } catch (const cf::TaskError& e) {
    return report(e.code(), e.what());
  } catch (const cf::GatewayError& e) {
    return report(e.code(), e.what());
  } catch (const cf::CorruptTranscript& e) {
    return report("CORRUPT_TRANSCRIPT", e.what());
  } catch (const std::exception& e) {
    return report("ERROR", e.what());
  }
  return kUsage;
}
