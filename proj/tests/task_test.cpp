#include <fstream>

#include <gtest/gtest.h>

#include "convoforge/task.hpp"
#include "support/generators.hpp"

namespace cf = convoforge;
using cf::testing::default_task;

namespace {

std::string error_of(const cf::json& j) {
  try {
    cf::load_task(j.dump());
  } catch (const cf::TaskError& e) {
    return e.what();
  }
  return "accepted";
}

cf::json task_json() { return cf::json::parse(cf::defaults::kTaskJson); }

}  // namespace

TEST(Task, LoadsDefault) {
  const auto& t = default_task();
  EXPECT_EQ(t.areas.size(), 3u);
  EXPECT_EQ(t.items.size(), 8u);
  EXPECT_EQ(t.steps.size(), 5u);
  EXPECT_EQ(t.durations.speech_per_token.ms, 400);
  EXPECT_EQ(t.durations.robot_fetch.ms + t.durations.robot_deliver.ms, 12000);
  EXPECT_TRUE(t.required_by_any_step("gear"));
  EXPECT_FALSE(t.required_by_any_step("spare gear"));
}

TEST(Task, RejectsBadConfigs) {
  auto j = task_json();
  j["areas"].erase(2);
  EXPECT_EQ(error_of(j), "exactly 3 areas required");
  j = task_json();
  j["steps"].erase(4);
  EXPECT_EQ(error_of(j), "exactly 5 steps required");
  j = task_json();
  j["items"][0]["area"] = "A9";
  EXPECT_NE(error_of(j).find("unknown area"), std::string::npos);
  j = task_json();
  j["steps"][1]["tool"] = "gear";
  EXPECT_NE(error_of(j).find("is not a tool"), std::string::npos);
  j = task_json();
  j["durations"]["human_pick_s"] = 0;
  EXPECT_NE(error_of(j).find("positive"), std::string::npos);
  j = task_json();
  j["colour"] = "red";
  EXPECT_NE(error_of(j).find("unknown key"), std::string::npos);
  j = task_json();
  for (auto& a : j["areas"]) a["access"] = "shared";
  EXPECT_NE(error_of(j).find("robot_only"), std::string::npos);
}

TEST(Task, RobotFetchMovesAndCostsTime) {
  cf::TaskState s(default_task());
  cf::SimClock clock;
  EXPECT_EQ(s.robot_fetch("gear", clock).kind, cf::FetchOutcome::Kind::delivered);
  EXPECT_EQ(clock.now().ms, 12000);
  EXPECT_EQ(s.workbench(), (std::vector<std::string>{"gear"}));
  // Already there: no cost.
  EXPECT_EQ(s.robot_fetch("gear", clock).kind, cf::FetchOutcome::Kind::delivered);
  EXPECT_EQ(clock.now().ms, 12000);
}

TEST(Task, UnavailableOffersAlternative) {
  cf::TaskState s(default_task());
  cf::SimClock clock;
  const auto ev = s.inject_fault(cf::ItemUnavailableFault{"gear"});
  EXPECT_EQ(ev.kind, cf::SimEvent::Kind::item_unavailable);
  const auto out = s.robot_fetch("gear", clock);
  EXPECT_EQ(out.kind, cf::FetchOutcome::Kind::unavailable);
  EXPECT_EQ(out.alternative, "spare gear");
  EXPECT_EQ(clock.now().ms, 0);
  // Tools have no spare.
  s.inject_fault(cf::ItemUnavailableFault{"wrench"});
  EXPECT_EQ(s.robot_fetch("wrench", clock).alternative, std::nullopt);
}

TEST(Task, AssembleChecksItemsAndConsumesComponents) {
  cf::TaskState s(default_task());
  cf::SimClock clock;
  s.robot_fetch("bracket", clock);
  EXPECT_EQ(s.human_pick("screwdriver", clock), cf::PickOutcome::picked);
  try {
    s.assemble_step(1, {"base plate"}, clock);
    FAIL();
  } catch (const cf::TaskError& e) {
    EXPECT_EQ(e.code(), "NOT_ON_WORKBENCH");
  }
  EXPECT_EQ(s.assemble_step(2, {"bracket"}, clock), cf::StepStatus::done_incorrect);
  EXPECT_TRUE(s.item("bracket").consumed);
  EXPECT_EQ(s.workbench(), (std::vector<std::string>{"screwdriver"}));
  try {
    s.assemble_step(2, {}, clock);
    FAIL();
  } catch (const cf::TaskError& e) {
    EXPECT_EQ(e.code(), "STEP_FINISHED");
  }
  EXPECT_THROW(s.assemble_step(6, {}, clock), cf::TaskError);
  s.robot_fetch("base plate", clock);
  EXPECT_EQ(s.assemble_step(1, {"base plate"}, clock), cf::StepStatus::done_correct);
  EXPECT_EQ(s.steps_finished(), 2);
  EXPECT_EQ(s.steps_correct(), 1);
  EXPECT_EQ(s.next_step()->index, 3);
  // Consumed items cannot be fetched again.
  EXPECT_EQ(s.robot_fetch("base plate", clock).kind, cf::FetchOutcome::Kind::unavailable);
}

// Every (item, actor) pair against the table produced by
// tests/oracles/permissions.py from the task file.
TEST(TaskPermissions, ExhaustiveAgainstOracle) {
  std::ifstream in(std::string(CONVOFORGE_ORACLE_DIR) + "/permissions.expected.json");
  ASSERT_TRUE(in);
  const auto table = cf::json::parse(in);
  ASSERT_EQ(table.size(), default_task().items.size() * 2);
  for (const auto& row : table) {
    cf::TaskState s(default_task());
    cf::SimClock clock;
    const std::string item = row["item"];
    bool allowed;
    if (row["actor"] == "human")
      allowed = s.human_pick(item, clock) == cf::PickOutcome::picked;
    else
      allowed = s.robot_fetch(item, clock).kind == cf::FetchOutcome::Kind::delivered;
    EXPECT_EQ(allowed, row["allowed"].get<bool>()) << item << " by " << row["actor"];
    if (!allowed) {
      EXPECT_EQ(clock.now().ms, 0);
      EXPECT_NE(s.item(item).location, cf::kWorkbench);
    }
  }
}

TEST(Task, UnknownItem) {
  cf::TaskState s(default_task());
  cf::SimClock clock;
  try {
    s.robot_fetch("banana", clock);
    FAIL();
  } catch (const cf::TaskError& e) {
    EXPECT_EQ(e.code(), "UNKNOWN_ITEM");
  }
}

TEST(SimTime, FormatAndClock) {
  EXPECT_EQ(cf::format_seconds(cf::SimTime{12400}), "12.400");
  EXPECT_EQ(cf::format_seconds(cf::SimTime{5}), "0.005");
  EXPECT_EQ(cf::SimTime::from_seconds(0.4).ms, 400);
  cf::SimClock c;
  c.advance(cf::SimTime{10});
  EXPECT_THROW(c.advance(cf::SimTime{-1}), std::exception);
  EXPECT_EQ(c.now().ms, 10);
}
