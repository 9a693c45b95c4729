#include <gtest/gtest.h>

#include "convoforge/schema.hpp"
#include "support/generators.hpp"

namespace cf = convoforge;

namespace {

cf::json minimal() {
  return cf::json::parse(R"({
    "name": "mini",
    "catalogs": [{"name": "part", "entries": [{"value": "gear", "synonyms": ["cog"]}]}],
    "dialogues": [{
      "name": "Ask",
      "utterances": ["bring me the {item}"],
      "slots": [{"name": "item", "kind": "catalog:part", "required": true, "elicit": "Which part?"}],
      "api": "fetch",
      "responses": {"on_complete": "ok", "on_no_match": "what?"}
    }],
    "apis": [{"name": "fetch", "args": ["item"], "routes": {"ok": {"respond": "here"}, "error": {"respond": "no"}}}]
  })");
}

std::string rule_of(const cf::json& j) {
  try {
    cf::parse_schema(j.dump());
  } catch (const cf::SchemaError& e) {
    return e.rule();
  }
  return "accepted";
}

}  // namespace

TEST(Schema, ParsesShippedFixture) {
  const auto& s = *cf::testing::default_schema();
  EXPECT_EQ(s.name, "assembly");
  EXPECT_EQ(s.dialogues.size(), 7u);
  EXPECT_EQ(s.apis.size(), 5u);
  const cf::Dialogue* d = s.dialogue("RequestItem");
  ASSERT_NE(d, nullptr);
  EXPECT_EQ(d->api, "fetch_item");
  ASSERT_EQ(d->utterances[0].tokens.size(), 4u);
  EXPECT_EQ(d->utterances[0].literal_count(), 3u);
  EXPECT_TRUE(std::holds_alternative<cf::TriggerRoute>(s.api("fetch_item")->route("unavailable")));
  EXPECT_TRUE(std::holds_alternative<cf::RespondRoute>(s.api("fetch_item")->route("anything else")));
}

TEST(Schema, SerializeParseRoundTrip) {
  const auto& s = *cf::testing::default_schema();
  EXPECT_EQ(cf::parse_schema(cf::serialize_schema(s)), s);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto g = cf::parse_schema(cf::testing::generate_schema_json(rng));
    EXPECT_EQ(cf::parse_schema(cf::serialize_schema(g)), g);
  }
}

TEST(Schema, MinimalIsValid) { EXPECT_EQ(rule_of(minimal()), "accepted"); }

TEST(Schema, DanglingSlotNamesTheSlot) {
  auto j = minimal();
  j["dialogues"][0]["utterances"][0] = "bring me the {thing}";
  try {
    cf::parse_schema(j.dump());
    FAIL() << "accepted";
  } catch (const cf::SchemaError& e) {
    EXPECT_EQ(e.rule(), "unresolved slot reference");
    EXPECT_NE(std::string(e.what()).find("thing"), std::string::npos);
  }
}

TEST(Schema, RejectsEachRule) {
  auto with = [](auto edit) {
    auto j = minimal();
    edit(j);
    return rule_of(j);
  };
  EXPECT_EQ(with([](cf::json& j) { j["catalogs"].push_back(j["catalogs"][0]); }), "duplicate catalog name");
  EXPECT_EQ(with([](cf::json& j) { j["catalogs"][0]["entries"] = cf::json::array(); }), "empty catalog");
  EXPECT_EQ(with([](cf::json& j) { j["catalogs"][0]["entries"][0]["synonyms"][0] = ""; }), "empty string");
  EXPECT_EQ(with([](cf::json& j) { j["catalogs"][0]["entries"].push_back(j["catalogs"][0]["entries"][0]); }),
            "duplicate canonical value");
  EXPECT_EQ(with([](cf::json& j) { j["apis"][0]["routes"].erase("error"); }), "missing route");
  EXPECT_EQ(with([](cf::json& j) { j["apis"][0]["args"].push_back("item"); }), "duplicate api argument");
  EXPECT_EQ(with([](cf::json& j) { j["apis"][0]["routes"]["ok"] = {{"trigger", "Nowhere"}}; }),
            "unknown trigger target");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["utterances"] = cf::json::array(); }), "empty utterance set");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["slots"].push_back(j["dialogues"][0]["slots"][0]); }),
            "duplicate slot name");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["slots"][0]["kind"] = "catalog:nope"; }), "unknown catalog");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["slots"][0]["elicit"] = ""; }), "missing elicit prompt");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["utterances"][0] = "{item}"; }), "no literal token");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["utterances"][0] = "the {item} and {item}"; }),
            "duplicate slot reference");
  EXPECT_EQ(with([](cf::json& j) {
              j["dialogues"][0]["slots"].push_back(
                  {{"name", "other"}, {"kind", "text"}, {"required", false}, {"elicit", ""}});
              j["dialogues"][0]["utterances"][0] = "the {item} {other}";
            }),
            "adjacent slots");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["api"] = "nope"; }), "unknown api");
  EXPECT_EQ(with([](cf::json& j) { j["apis"][0]["args"] = {"colour"}; }), "api args mismatch");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["utterances"][0] = "bring {item"; }), "malformed utterance");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["name"] = "not valid"; }), "invalid identifier");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"][0]["slots"][0]["kind"] = "number"; }), "bad slot kind");
  EXPECT_EQ(with([](cf::json& j) { j["apis"][0]["routes"]["ok"] = {{"shout", "x"}}; }), "bad route");
  EXPECT_EQ(with([](cf::json& j) { j["name"] = 5; }), "type");
  EXPECT_EQ(with([](cf::json& j) { j.erase("apis"); }), "missing key");
  EXPECT_EQ(with([](cf::json& j) { j["extra"] = true; }), "unknown key");
  EXPECT_EQ(with([](cf::json& j) { j["dialogues"].push_back(j["dialogues"][0]); }), "duplicate dialogue name");
  EXPECT_EQ(with([](cf::json& j) { j["apis"].push_back(j["apis"][0]); }), "duplicate api name");
}

TEST(Schema, SyntaxErrorReportsPosition) {
  try {
    cf::parse_schema("{\n  \"name\": \"x\",\n  oops\n}");
    FAIL() << "accepted";
  } catch (const cf::SchemaError& e) {
    EXPECT_EQ(e.rule(), "syntax");
    EXPECT_EQ(e.line(), 3);
    EXPECT_GT(e.column(), 0);
  }
}

TEST(Schema, RenderTemplate) {
  EXPECT_EQ(cf::render_template("The {item} is {state}.", {{"item", "gear"}, {"state", "here"}}),
            "The gear is here.");
  EXPECT_EQ(cf::render_template("Keep {unknown} and {", {}), "Keep {unknown} and {");
  EXPECT_EQ(cf::template_variables("{a} and {b}"), (std::vector<std::string>{"a", "b"}));
}
