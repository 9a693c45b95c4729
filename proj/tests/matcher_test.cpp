#include <chrono>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "convoforge/matcher.hpp"
#include "support/generators.hpp"

namespace cf = convoforge;
using cf::testing::default_schema;

TEST(Matcher, BindsCanonicalFromSynonym) {
  cf::UtteranceMatcher m(default_schema());
  auto r = m.match("Bring me the COG!");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->dialogue, "RequestItem");
  EXPECT_EQ(r->bindings, (cf::Bindings{{"item", "gear"}}));
  EXPECT_EQ(r->score.value(), 1.0);
}

TEST(Matcher, LongestPhraseWins) {
  cf::UtteranceMatcher m(default_schema());
  auto r = m.match("bring me the spare gear");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->bindings.at("item"), "spare gear");
  EXPECT_EQ(m.find_catalog_value("component", "the backup gear please"), "spare gear");
  EXPECT_EQ(m.find_catalog_value("component", "a gear and a lid"), "gear");
  EXPECT_EQ(m.find_catalog_value("component", "nothing here"), std::nullopt);
  EXPECT_EQ(m.find_catalog_value("missing", "gear"), std::nullopt);
}

TEST(Matcher, SharedSkeletonResolvedByCatalog) {
  cf::UtteranceMatcher m(default_schema());
  auto r = m.match("bring me the spanner");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->dialogue, "RequestTool");
  EXPECT_EQ(r->bindings.at("item"), "wrench");
}

TEST(Matcher, NoMatch) {
  cf::UtteranceMatcher m(default_schema());
  EXPECT_FALSE(m.match("bring me the b"));
  EXPECT_FALSE(m.match("bring me the gear now"));
  EXPECT_FALSE(m.match(""));
}

TEST(Matcher, ContextIsTriedFirst) {
  auto j = cf::json::parse(cf::serialize_schema(*default_schema()));
  // A second dialogue with the same utterance; declaration order picks the
  // first unless the context names the second.
  auto copy = j["dialogues"][2];
  copy["name"] = "Twin";
  j["dialogues"].push_back(copy);
  cf::UtteranceMatcher m(std::make_shared<const cf::DialogueSchema>(cf::parse_schema(j.dump())));
  EXPECT_EQ(m.match("i need help")->dialogue, "RequestAssistance");
  EXPECT_EQ(m.match("i need help", std::string_view("Twin"))->dialogue, "Twin");
  EXPECT_EQ(m.match("i need help", std::string_view("RequestItem"))->dialogue, "RequestAssistance");
}

TEST(Matcher, FreeTextSlotTakesRemainder) {
  auto s = cf::parse_schema(R"({"name":"t","catalogs":[],"apis":[],"dialogues":[{"name":"Note",
    "utterances":["note that {text}","say {text} twice"],"slots":[{"name":"text","kind":"text","required":true,"elicit":"What?"}],
    "api":null,"responses":{"on_complete":"noted","on_no_match":"?"}}]})");
  auto r = cf::match_utterance(s, "Note that the cover is loose.");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->bindings.at("text"), "the cover is loose");
  r = cf::match_utterance(s, "say hello twice twice");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->bindings.at("text"), "hello twice");
  EXPECT_THROW(cf::expand_template(s, "Note", 0), cf::NotEnumerable);
}

// Counts produced by tests/oracles/grounding_counts.py from the schema JSON.
TEST(Matcher, GroundingCountsMatchOracle) {
  std::ifstream in(std::string(CONVOFORGE_ORACLE_DIR) + "/grounding_counts.expected.json");
  ASSERT_TRUE(in);
  const auto want = cf::json::parse(in);
  const auto& s = *default_schema();
  std::size_t checked = 0;
  for (const auto& d : s.dialogues) {
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      const std::string key = d.name + "/" + std::to_string(i);
      ASSERT_TRUE(want.contains(key)) << key;
      EXPECT_EQ(cf::expand_template(s, d.name, i).size(), want[key].get<std::size_t>()) << key;
      ++checked;
    }
  }
  EXPECT_EQ(checked, want.size());
  EXPECT_EQ(cf::expand_template(s, "RequestTool", 0).size(), 4u);
}

TEST(Matcher, InvertsDefaultSchemaGroundings) {
  const auto& s = *default_schema();
  cf::UtteranceMatcher m(default_schema());
  for (const auto& d : s.dialogues) {
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      for (const auto& g : cf::expand_template(s, d.name, i)) {
        auto r = m.match(g.surface, std::string_view(d.name));
        ASSERT_TRUE(r) << g.surface;
        EXPECT_EQ(r->dialogue, d.name) << g.surface;
        EXPECT_EQ(r->bindings, g.bindings) << g.surface;
      }
    }
  }
}

TEST(Matcher, InvertsGeneratedSchemaGroundings) {
  std::mt19937_64 rng(2024);
  std::size_t groundings = 0;
  for (int k = 0; k < 50; ++k) {
    auto s = std::make_shared<const cf::DialogueSchema>(cf::parse_schema(cf::testing::generate_schema_json(rng)));
    cf::UtteranceMatcher m(s);
    for (const auto& d : s->dialogues) {
      for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        for (const auto& g : cf::expand_template(*s, d.name, i)) {
          auto r = m.match(g.surface);
          ASSERT_TRUE(r) << g.surface;
          EXPECT_EQ(r->dialogue, d.name);
          EXPECT_EQ(r->utterance_index, i);
          EXPECT_EQ(r->bindings, g.bindings);
          ++groundings;
        }
      }
    }
  }
  EXPECT_GT(groundings, 500u);
}

TEST(Matcher, DeterministicAcrossInstances) {
  std::mt19937_64 rng(9);
  cf::UtteranceMatcher a(default_schema()), b(default_schema());
  for (int i = 0; i < 500; ++i) {
    const auto u = cf::testing::random_utterance(rng);
    EXPECT_EQ(a.match(u), b.match(u)) << u;
  }
}
