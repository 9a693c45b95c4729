#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "convoforge/normalize.hpp"
#include "support/generators.hpp"

namespace cf = convoforge;

TEST(Normalize, FoldsCaseStripsPunctuationCollapsesSpace) {
  EXPECT_EQ(cf::normalize("  Bring me the GEAR, please!  "), "bring me the gear please");
  EXPECT_EQ(cf::normalize("\"Don't\"\tstop;\n\nnow?"), "dont stop now");
  EXPECT_EQ(cf::normalize(""), "");
  EXPECT_EQ(cf::normalize(" .,;:!? "), "");
}

TEST(Normalize, FoldsGreekAndCyrillic) {
  EXPECT_EQ(cf::normalize("ΟΔΟΣ"), "οδοσ");
  EXPECT_EQ(cf::normalize("Шестерня"), "шестерня");
  EXPECT_EQ(cf::normalize("Straße"), "strasse");
}

// Table produced by tests/oracles/casefold_table.py from Unicode full case
// folding; frozen in casefold.expected.json.
TEST(Normalize, MatchesCaseFoldOracle) {
  std::ifstream in(std::string(CONVOFORGE_ORACLE_DIR) + "/casefold.expected.json");
  ASSERT_TRUE(in);
  const auto table = cf::json::parse(in);
  ASSERT_GT(table.size(), 300u);
  for (const auto& [hex, folded] : table.items()) {
    std::string ch;
    cf::detail::append_utf8(ch, static_cast<char32_t>(std::stoul(hex, nullptr, 16)));
    EXPECT_EQ(cf::normalize(ch), folded.get<std::string>()) << "U+" << hex;
  }
}

TEST(Normalize, IsIdempotent) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const std::string s = cf::testing::random_text(rng, 20);
    const std::string once = cf::normalize(s);
    EXPECT_EQ(cf::normalize(once), once);
    EXPECT_EQ(once.find("  "), std::string::npos);
    if (!once.empty()) {
      EXPECT_NE(once.front(), ' ');
      EXPECT_NE(once.back(), ' ');
    }
  }
}

TEST(Normalize, TokenizeAndJoinRoundTrip) {
  const auto tokens = cf::tokenize("Pass me  the Base-Plate.");
  ASSERT_EQ(tokens, (std::vector<std::string>{"pass", "me", "the", "base-plate"}));
  EXPECT_EQ(cf::join(tokens), "pass me the base-plate");
  EXPECT_TRUE(cf::tokenize(" ?! ").empty());
}

TEST(Normalize, WordCount) {
  EXPECT_EQ(cf::word_count("I placed the gear on the bench."), 7u);
  EXPECT_EQ(cf::word_count("  "), 0u);
  EXPECT_EQ(cf::word_count("a\tb\nc"), 3u);
}
