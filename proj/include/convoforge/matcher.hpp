#pragma once

// Deterministic utterance matcher: literal tokens must match in order, slot
// spans bind by longest catalog phrase (canonical or synonym).

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "convoforge/normalize.hpp"
#include "convoforge/schema.hpp"

namespace convoforge {

using Bindings = std::map<std::string, std::string>;

/// Fraction of the template's literal tokens that matched.
struct Score {
  std::size_t matched = 0;
  std::size_t total = 1;
  double value() const { return total ? static_cast<double>(matched) / static_cast<double>(total) : 0.0; }
  bool operator==(const Score&) const = default;
};

struct Match {
  std::string dialogue;
  std::size_t utterance_index = 0;
  Bindings bindings;
  Score score;
  bool operator==(const Match&) const = default;
};

/// nullopt is the no-match outcome.
using MatchResult = std::optional<Match>;

struct Grounding {
  std::string surface;
  Bindings bindings;
};

class NotEnumerable : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every grounding of `t`, substituting each canonical and each synonym of
/// each slot's catalog.
inline std::vector<Grounding> expand_template(const UtteranceTemplate& t, const Dialogue& dialogue,
                                              const DialogueSchema& schema) {
  std::vector<Grounding> out{Grounding{}};
  std::vector<std::vector<std::string>> surfaces(1);
  for (const auto& tok : t.tokens) {
    if (const auto* lit = std::get_if<LiteralToken>(&tok)) {
      for (auto& s : surfaces) s.push_back(lit->word);
      continue;
    }
    const auto& slot_name = std::get<SlotToken>(tok).slot;
    const SlotDef* slot = dialogue.slot(slot_name);
    if (!slot || !slot->is_catalog()) throw NotEnumerable("not enumerable: free-text slot " + slot_name);
    const Catalog* catalog = schema.catalog(slot->catalog_name());
    std::vector<Grounding> next;
    std::vector<std::vector<std::string>> next_surfaces;
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (const auto& entry : catalog->entries) {
        auto emit = [&](const std::string& phrase) {
          Grounding g = out[i];
          g.bindings[slot_name] = entry.value;
          next.push_back(std::move(g));
          next_surfaces.push_back(surfaces[i]);
          next_surfaces.back().push_back(phrase);
        };
        emit(entry.value);
        for (const auto& syn : entry.synonyms) emit(syn);
      }
    }
    out = std::move(next);
    surfaces = std::move(next_surfaces);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].surface = join(surfaces[i]);
  return out;
}

inline std::vector<Grounding> expand_template(const DialogueSchema& schema, std::string_view dialogue,
                                              std::size_t utterance_index) {
  const Dialogue* d = schema.dialogue(dialogue);
  if (!d || utterance_index >= d->utterances.size()) throw std::out_of_range("no such utterance");
  return expand_template(d->utterances[utterance_index], *d, schema);
}

/// Matcher over an immutable schema; safe for concurrent use.
class UtteranceMatcher {
 public:
  explicit UtteranceMatcher(std::shared_ptr<const DialogueSchema> schema) : schema_(std::move(schema)) {
    for (const auto& c : schema_->catalogs) {
      auto& phrases = phrases_[c.name];
      for (const auto& e : c.entries) {
        phrases.push_back({tokenize(e.value), e.value});
        for (const auto& syn : e.synonyms) phrases.push_back({tokenize(syn), e.value});
      }
      std::stable_sort(phrases.begin(), phrases.end(),
                       [](const Phrase& a, const Phrase& b) { return a.tokens.size() > b.tokens.size(); });
    }
  }

  const DialogueSchema& schema() const { return *schema_; }
  const std::shared_ptr<const DialogueSchema>& schema_ptr() const { return schema_; }

  /// Templates of `context` are tried first; otherwise declaration order.
  MatchResult match(std::string_view input, std::optional<std::string_view> context = std::nullopt) const {
    const auto tokens = tokenize(input);
    if (context) {
      const std::size_t ci = schema_->dialogue_index(*context);
      if (ci < schema_->dialogues.size())
        if (auto m = match_dialogue(schema_->dialogues[ci], tokens)) return m;
    }
    MatchResult best;
    for (const auto& d : schema_->dialogues) {
      auto m = match_dialogue(d, tokens);
      if (m && (!best || m->score.value() > best->score.value())) best = std::move(m);
    }
    return best;
  }

  /// Leftmost-longest catalog phrase anywhere in `input`; returns canonical.
  std::optional<std::string> find_catalog_value(std::string_view catalog, std::string_view input) const {
    auto it = phrases_.find(std::string(catalog));
    if (it == phrases_.end()) return std::nullopt;
    const auto tokens = tokenize(input);
    for (std::size_t pos = 0; pos < tokens.size(); ++pos)
      for (const auto& p : it->second)
        if (phrase_at(p, tokens, pos)) return p.canonical;
    return std::nullopt;
  }

 private:
  struct Phrase {
    std::vector<std::string> tokens;
    std::string canonical;
  };

  static bool phrase_at(const Phrase& p, const std::vector<std::string>& input, std::size_t pos) {
    if (p.tokens.empty() || pos + p.tokens.size() > input.size()) return false;
    for (std::size_t k = 0; k < p.tokens.size(); ++k)
      if (input[pos + k] != p.tokens[k]) return false;
    return true;
  }

  MatchResult match_dialogue(const Dialogue& d, const std::vector<std::string>& input) const {
    MatchResult best;
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      const auto& t = d.utterances[i];
      Bindings b;
      if (!bind(d, t, input, 0, 0, b)) continue;
      const std::size_t lits = t.literal_count();
      Match m{d.name, i, std::move(b), Score{lits, lits}};
      if (!best || m.score.value() > best->score.value()) best = std::move(m);
    }
    return best;
  }

  bool bind(const Dialogue& d, const UtteranceTemplate& t, const std::vector<std::string>& input,
            std::size_t tok, std::size_t pos, Bindings& out) const {
    if (tok == t.tokens.size()) return pos == input.size();
    if (const auto* lit = std::get_if<LiteralToken>(&t.tokens[tok])) {
      return pos < input.size() && input[pos] == lit->word && bind(d, t, input, tok + 1, pos + 1, out);
    }
    const auto& slot_name = std::get<SlotToken>(t.tokens[tok]).slot;
    const SlotDef* slot = d.slot(slot_name);
    if (slot->is_catalog()) {
      const auto& phrases = phrases_.at(slot->catalog_name());
      for (const auto& p : phrases) {
        if (!phrase_at(p, input, pos)) continue;
        out[slot_name] = p.canonical;
        if (bind(d, t, input, tok + 1, pos + p.tokens.size(), out)) return true;
      }
      out.erase(slot_name);
      return false;
    }
    for (std::size_t end = input.size(); end > pos; --end) {
      out[slot_name] = join({input.begin() + static_cast<std::ptrdiff_t>(pos),
                             input.begin() + static_cast<std::ptrdiff_t>(end)});
      if (bind(d, t, input, tok + 1, end, out)) return true;
    }
    out.erase(slot_name);
    return false;
  }

  std::shared_ptr<const DialogueSchema> schema_;
  std::map<std::string, std::vector<Phrase>> phrases_;
};

inline MatchResult match_utterance(const DialogueSchema& schema, std::string_view input,
                                   std::optional<std::string_view> context = std::nullopt) {
  UtteranceMatcher m(std::make_shared<const DialogueSchema>(schema));
  return m.match(input, context);
}

}  // namespace convoforge
