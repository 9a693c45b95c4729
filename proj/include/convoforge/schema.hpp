#pragma once

// Declarative dialogue schema: catalogs, dialogues with utterance sets and
// slots, and the dialogue APIs they dispatch to.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "convoforge/normalize.hpp"

namespace convoforge {

using json = nlohmann::json;

/// Raised by parse_schema. `rule` is a stable short name of the violated
/// check ("syntax", "unresolved slot reference", ...).
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string rule, std::string element, const std::string& detail, int line = 0,
              int column = 0)
      : std::runtime_error(format(rule, element, detail, line, column)),
        rule_(std::move(rule)),
        element_(std::move(element)),
        line_(line),
        column_(column) {}

  const std::string& rule() const noexcept { return rule_; }
  const std::string& element() const noexcept { return element_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& rule, const std::string& element,
                            const std::string& detail, int line, int column) {
    std::string msg = rule;
    if (line > 0) msg += " at " + std::to_string(line) + ":" + std::to_string(column);
    if (!element.empty()) msg += " (" + element + ")";
    if (!detail.empty()) msg += ": " + detail;
    return msg;
  }

  std::string rule_;
  std::string element_;
  int line_;
  int column_;
};

struct CatalogEntry {
  std::string value;
  std::vector<std::string> synonyms;
  bool operator==(const CatalogEntry&) const = default;
};

struct Catalog {
  std::string name;
  std::vector<CatalogEntry> entries;
  bool operator==(const Catalog&) const = default;

  const CatalogEntry* find(std::string_view canonical) const {
    for (const auto& e : entries)
      if (e.value == canonical) return &e;
    return nullptr;
  }
};

struct CatalogSlot {
  std::string catalog;
  bool operator==(const CatalogSlot&) const = default;
};
struct FreeTextSlot {
  bool operator==(const FreeTextSlot&) const = default;
};
using SlotKind = std::variant<CatalogSlot, FreeTextSlot>;

struct SlotDef {
  std::string name;
  SlotKind kind;
  bool required = false;
  std::string elicit_prompt;
  bool operator==(const SlotDef&) const = default;

  bool is_catalog() const { return std::holds_alternative<CatalogSlot>(kind); }
  const std::string& catalog_name() const { return std::get<CatalogSlot>(kind).catalog; }
};

struct LiteralToken {
  std::string word;  // normalized
  bool operator==(const LiteralToken&) const = default;
};
struct SlotToken {
  std::string slot;
  bool operator==(const SlotToken&) const = default;
};
using TemplateToken = std::variant<LiteralToken, SlotToken>;

struct UtteranceTemplate {
  std::string text;  // as authored, `{slot}` marks a slot
  std::vector<TemplateToken> tokens;
  bool operator==(const UtteranceTemplate&) const = default;

  std::size_t literal_count() const {
    return static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(), [](const auto& t) {
      return std::holds_alternative<LiteralToken>(t);
    }));
  }
};

struct ResponseTemplates {
  std::string on_complete;
  std::string on_no_match;
  bool operator==(const ResponseTemplates&) const = default;
};

struct Dialogue {
  std::string name;
  std::vector<UtteranceTemplate> utterances;
  std::vector<SlotDef> slots;
  std::optional<std::string> api;
  ResponseTemplates responses;
  bool operator==(const Dialogue&) const = default;

  const SlotDef* slot(std::string_view slot_name) const {
    for (const auto& s : slots)
      if (s.name == slot_name) return &s;
    return nullptr;
  }
};

struct RespondRoute {
  std::string text;
  bool operator==(const RespondRoute&) const = default;
};
struct TriggerRoute {
  std::string dialogue;
  bool operator==(const TriggerRoute&) const = default;
};
using ResultRoute = std::variant<RespondRoute, TriggerRoute>;

struct ApiDef {
  std::string name;
  std::vector<std::string> args;
  std::map<std::string, ResultRoute> routes;
  bool operator==(const ApiDef&) const = default;

  /// Route for `status`, falling back to "error" for unrouted statuses.
  const ResultRoute& route(std::string_view status) const {
    if (auto it = routes.find(std::string(status)); it != routes.end()) return it->second;
    return routes.at("error");
  }
};

struct DialogueSchema {
  std::string name;
  std::vector<Catalog> catalogs;
  std::vector<Dialogue> dialogues;
  std::vector<ApiDef> apis;
  bool operator==(const DialogueSchema&) const = default;

  const Catalog* catalog(std::string_view n) const {
    for (const auto& c : catalogs)
      if (c.name == n) return &c;
    return nullptr;
  }
  const Dialogue* dialogue(std::string_view n) const {
    for (const auto& d : dialogues)
      if (d.name == n) return &d;
    return nullptr;
  }
  const ApiDef* api(std::string_view n) const {
    for (const auto& a : apis)
      if (a.name == n) return &a;
    return nullptr;
  }
  std::size_t dialogue_index(std::string_view n) const {
    for (std::size_t i = 0; i < dialogues.size(); ++i)
      if (dialogues[i].name == n) return i;
    return dialogues.size();
  }
};

/// Names referenced as `{name}` in a response or prompt template.
inline std::vector<std::string> template_variables(std::string_view text) {
  std::vector<std::string> vars;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    const auto close = text.find('}', pos);
    if (close == std::string_view::npos) break;
    vars.emplace_back(text.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return vars;
}

/// Substitutes `{name}` with values; unknown names are left verbatim.
inline std::string render_template(std::string_view text,
                                   const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find('}', open);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    const std::string key(text.substr(open + 1, close - open - 1));
    if (auto it = values.find(key); it != values.end())
      out += it->second;
    else
      out.append(text.substr(open, close - open + 1));
    pos = close + 1;
  }
  out.append(text.substr(pos));
  return out;
}

namespace detail {

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(s[0])) return false;
  return std::all_of(s.begin(), s.end(),
                     [&](char c) { return alpha(c) || (c >= '0' && c <= '9'); });
}

inline std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Strict object reader: every key must be consumed, none may be unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw SchemaError("type", where_, "expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) pending_.insert(it.key());
  }

  const json& at(const std::string& key) {
    if (!j_.contains(key)) throw SchemaError("missing key", where_, "\"" + key + "\"");
    pending_.erase(key);
    return j_.at(key);
  }

  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) throw SchemaError("type", where_ + "." + key, "expected a string");
    return v.get<std::string>();
  }

  const json& array(const std::string& key) {
    const json& v = at(key);
    if (!v.is_array()) throw SchemaError("type", where_ + "." + key, "expected an array");
    return v;
  }

  bool boolean(const std::string& key) {
    const json& v = at(key);
    if (!v.is_boolean()) throw SchemaError("type", where_ + "." + key, "expected a boolean");
    return v.get<bool>();
  }

  void finish() const {
    if (!pending_.empty()) throw SchemaError("unknown key", where_, "\"" + *pending_.begin() + "\"");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> pending_;
};

inline std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw SchemaError("type", where, "expected a string");
  return v.get<std::string>();
}

inline UtteranceTemplate parse_utterance(const std::string& text, const std::string& where) {
  UtteranceTemplate t;
  t.text = text;
  std::size_t pos = 0;
  auto push_literal = [&](std::string_view chunk) {
    for (auto& w : tokenize(chunk)) t.tokens.emplace_back(LiteralToken{std::move(w)});
  };
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    const auto stray = text.find('}', pos);
    if (stray != std::string::npos && (open == std::string::npos || stray < open))
      throw SchemaError("malformed utterance", where, "unbalanced '}'");
    if (open == std::string::npos) {
      push_literal(std::string_view(text).substr(pos));
      break;
    }
    push_literal(std::string_view(text).substr(pos, open - pos));
    const auto close = text.find('}', open);
    if (close == std::string::npos) throw SchemaError("malformed utterance", where, "unbalanced '{'");
    std::string slot = text.substr(open + 1, close - open - 1);
    if (!is_identifier(slot)) throw SchemaError("malformed utterance", where, "bad slot name '" + slot + "'");
    t.tokens.emplace_back(SlotToken{std::move(slot)});
    pos = close + 1;
  }
  return t;
}

inline SlotKind parse_slot_kind(const std::string& kind, const std::string& where) {
  if (kind == "text") return FreeTextSlot{};
  constexpr std::string_view prefix = "catalog:";
  if (kind.rfind(prefix, 0) == 0 && kind.size() > prefix.size())
    return CatalogSlot{kind.substr(prefix.size())};
  throw SchemaError("bad slot kind", where, "\"" + kind + "\"");
}

inline void require_identifier(const std::string& name, const std::string& where) {
  if (!is_identifier(name)) throw SchemaError("invalid identifier", where, "\"" + name + "\"");
}

}  // namespace detail

/// Checks every cross-reference and structural rule; throws SchemaError on
/// the first violation found.
inline void validate_schema(const DialogueSchema& s) {
  std::set<std::string> seen;
  for (const auto& c : s.catalogs) {
    if (!seen.insert(c.name).second) throw SchemaError("duplicate catalog name", c.name, "");
    if (c.entries.empty()) throw SchemaError("empty catalog", c.name, "");
    std::set<std::string> values;
    std::set<std::string> phrases;
    for (const auto& e : c.entries) {
      if (e.value.empty() || normalize(e.value).empty())
        throw SchemaError("empty string", c.name, "catalog value");
      if (!values.insert(e.value).second)
        throw SchemaError("duplicate canonical value", c.name + "." + e.value, "");
      for (const auto& syn : e.synonyms)
        if (syn.empty() || normalize(syn).empty())
          throw SchemaError("empty string", c.name + "." + e.value, "synonym");
    }
  }
  seen.clear();
  for (const auto& a : s.apis) {
    if (!seen.insert(a.name).second) throw SchemaError("duplicate api name", a.name, "");
    if (!a.routes.contains("ok") || !a.routes.contains("error"))
      throw SchemaError("missing route", a.name, "routes for \"ok\" and \"error\" are required");
    std::set<std::string> args;
    for (const auto& arg : a.args)
      if (!args.insert(arg).second) throw SchemaError("duplicate api argument", a.name + "." + arg, "");
  }
  seen.clear();
  for (const auto& d : s.dialogues) {
    if (!seen.insert(d.name).second) throw SchemaError("duplicate dialogue name", d.name, "");
  }
  for (const auto& a : s.apis)
    for (const auto& [status, route] : a.routes)
      if (const auto* t = std::get_if<TriggerRoute>(&route); t && !s.dialogue(t->dialogue))
        throw SchemaError("unknown trigger target", a.name + "." + status, t->dialogue);

  for (const auto& d : s.dialogues) {
    if (d.utterances.empty()) throw SchemaError("empty utterance set", d.name, "");
    std::set<std::string> slot_names;
    for (const auto& slot : d.slots) {
      const std::string where = d.name + "." + slot.name;
      if (!slot_names.insert(slot.name).second) throw SchemaError("duplicate slot name", where, "");
      if (slot.is_catalog() && !s.catalog(slot.catalog_name()))
        throw SchemaError("unknown catalog", where, slot.catalog_name());
      if (slot.required && slot.elicit_prompt.empty())
        throw SchemaError("missing elicit prompt", where, "required slots need a prompt");
    }
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      const auto& u = d.utterances[i];
      const std::string where = d.name + ".utterances[" + std::to_string(i) + "]";
      if (u.literal_count() == 0) throw SchemaError("no literal token", where, u.text);
      std::set<std::string> used;
      for (std::size_t k = 0; k < u.tokens.size(); ++k) {
        const auto* st = std::get_if<SlotToken>(&u.tokens[k]);
        if (!st) continue;
        if (!d.slot(st->slot)) throw SchemaError("unresolved slot reference", where + " {" + st->slot + "}", u.text);
        if (!used.insert(st->slot).second) throw SchemaError("duplicate slot reference", where, st->slot);
        if (k + 1 < u.tokens.size() && std::holds_alternative<SlotToken>(u.tokens[k + 1]))
          throw SchemaError("adjacent slots", where, u.text);
      }
    }
    if (d.api) {
      const ApiDef* api = s.api(*d.api);
      if (!api) throw SchemaError("unknown api", d.name, *d.api);
      std::set<std::string> required;
      for (const auto& slot : d.slots)
        if (slot.required) required.insert(slot.name);
      const std::set<std::string> args(api->args.begin(), api->args.end());
      if (args != required)
        throw SchemaError("api args mismatch", d.name, "api " + api->name + " arguments differ from required slots");
    }
  }
}

/// Parses and validates a schema document.
inline DialogueSchema parse_schema(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw SchemaError("syntax", "", e.what(), line, col);
  }
  using detail::ObjectReader;
  DialogueSchema s;
  ObjectReader top(root, "schema");
  s.name = top.string("name");
  for (const auto& jc : top.array("catalogs")) {
    ObjectReader rc(jc, "catalog");
    Catalog c;
    c.name = rc.string("name");
    detail::require_identifier(c.name, "catalog");
    for (const auto& je : rc.array("entries")) {
      ObjectReader re(je, "catalog " + c.name + " entry");
      CatalogEntry e;
      e.value = re.string("value");
      for (const auto& syn : re.array("synonyms")) e.synonyms.push_back(detail::as_string(syn, c.name));
      re.finish();
      c.entries.push_back(std::move(e));
    }
    rc.finish();
    s.catalogs.push_back(std::move(c));
  }
  for (const auto& jd : top.array("dialogues")) {
    ObjectReader rd(jd, "dialogue");
    Dialogue d;
    d.name = rd.string("name");
    detail::require_identifier(d.name, "dialogue");
    for (const auto& ju : rd.array("utterances"))
      d.utterances.push_back(detail::parse_utterance(detail::as_string(ju, d.name), d.name));
    for (const auto& js : rd.array("slots")) {
      ObjectReader rs(js, d.name + " slot");
      SlotDef slot;
      slot.name = rs.string("name");
      detail::require_identifier(slot.name, d.name + " slot");
      slot.kind = detail::parse_slot_kind(rs.string("kind"), d.name + "." + slot.name);
      slot.required = rs.boolean("required");
      slot.elicit_prompt = rs.string("elicit");
      rs.finish();
      d.slots.push_back(std::move(slot));
    }
    const json& api = rd.at("api");
    if (api.is_string())
      d.api = api.get<std::string>();
    else if (!api.is_null())
      throw SchemaError("type", d.name + ".api", "expected a string or null");
    ObjectReader rr(rd.at("responses"), d.name + ".responses");
    d.responses.on_complete = rr.string("on_complete");
    d.responses.on_no_match = rr.string("on_no_match");
    rr.finish();
    rd.finish();
    s.dialogues.push_back(std::move(d));
  }
  for (const auto& ja : top.array("apis")) {
    ObjectReader ra(ja, "api");
    ApiDef a;
    a.name = ra.string("name");
    detail::require_identifier(a.name, "api");
    for (const auto& arg : ra.array("args")) a.args.push_back(detail::as_string(arg, a.name));
    const json& routes = ra.at("routes");
    if (!routes.is_object()) throw SchemaError("type", a.name + ".routes", "expected an object");
    for (auto it = routes.begin(); it != routes.end(); ++it) {
      ObjectReader rr(it.value(), a.name + ".routes." + it.key());
      const json& v = it.value();
      if (v.contains("respond") && v.size() == 1) {
        a.routes.emplace(it.key(), RespondRoute{rr.string("respond")});
      } else if (v.contains("trigger") && v.size() == 1) {
        a.routes.emplace(it.key(), TriggerRoute{rr.string("trigger")});
      } else {
        throw SchemaError("bad route", a.name + ".routes." + it.key(), "expected {respond} or {trigger}");
      }
    }
    ra.finish();
    s.apis.push_back(std::move(a));
  }
  top.finish();
  validate_schema(s);
  return s;
}

inline json schema_to_json(const DialogueSchema& s) {
  json root = json::object();
  root["name"] = s.name;
  root["catalogs"] = json::array();
  for (const auto& c : s.catalogs) {
    json jc{{"name", c.name}, {"entries", json::array()}};
    for (const auto& e : c.entries) jc["entries"].push_back({{"value", e.value}, {"synonyms", e.synonyms}});
    root["catalogs"].push_back(std::move(jc));
  }
  root["dialogues"] = json::array();
  for (const auto& d : s.dialogues) {
    json jd{{"name", d.name}, {"utterances", json::array()}, {"slots", json::array()}};
    for (const auto& u : d.utterances) jd["utterances"].push_back(u.text);
    for (const auto& slot : d.slots) {
      jd["slots"].push_back({{"name", slot.name},
                             {"kind", slot.is_catalog() ? "catalog:" + slot.catalog_name() : std::string("text")},
                             {"required", slot.required},
                             {"elicit", slot.elicit_prompt}});
    }
    jd["api"] = d.api ? json(*d.api) : json(nullptr);
    jd["responses"] = {{"on_complete", d.responses.on_complete}, {"on_no_match", d.responses.on_no_match}};
    root["dialogues"].push_back(std::move(jd));
  }
  root["apis"] = json::array();
  for (const auto& a : s.apis) {
    json ja{{"name", a.name}, {"args", a.args}, {"routes", json::object()}};
    for (const auto& [status, route] : a.routes) {
      if (const auto* r = std::get_if<RespondRoute>(&route))
        ja["routes"][status] = {{"respond", r->text}};
      else
        ja["routes"][status] = {{"trigger", std::get<TriggerRoute>(route).dialogue}};
    }
    root["apis"].push_back(std::move(ja));
  }
  return root;
}

inline std::string serialize_schema(const DialogueSchema& s, int indent = 2) {
  return schema_to_json(s).dump(indent, ' ', false);
}

}  // namespace convoforge
