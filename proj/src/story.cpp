#include "storyline/story.hpp"

#include "storyline/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace storyline {

namespace {

using nlohmann::json;

const json& require_field(const json& doc, const char* key, json::value_t type) {
  auto it = doc.find(key);
  if (it == doc.end()) throw SyntaxError(std::string("missing field '") + key + "'");
  if (it->type() != type) throw SyntaxError(std::string("field '") + key + "' has the wrong type");
  return *it;
}

}  // namespace

void validate_script(const StoryScript& script) {
  if (script.characters.empty()) throw ValidationError("script has no characters");
  if (script.slots.empty()) throw ValidationError("script has no time slots");
  const auto n = static_cast<CharacterId>(script.characters.size());
  for (CharacterId i = 0; i < n; ++i) {
    const auto& c = script.characters[static_cast<std::size_t>(i)];
    if (c.id != i) throw ValidationError("character ids must be dense and in declaration order");
    if (c.name.empty()) throw ValidationError("character names must be non-empty");
  }
  for (std::size_t j = 0; j < script.slots.size(); ++j) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const auto& session : script.slots[j]) {
      if (session.members.empty()) {
        throw ValidationError("empty session at slot " + std::to_string(j));
      }
      if (!std::is_sorted(session.members.begin(), session.members.end())) {
        throw ValidationError("session members must be sorted");
      }
      for (CharacterId m : session.members) {
        if (m < 0 || m >= n) throw ValidationError("unknown character id in slot " + std::to_string(j));
        auto& flag = seen[static_cast<std::size_t>(m)];
        if (flag) {
          throw ValidationError("character '" + script.characters[static_cast<std::size_t>(m)].name +
                                "' appears twice in slot " + std::to_string(j));
        }
        flag = 1;
      }
    }
  }
}

StoryScript parse_script(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("malformed script document: ") + e.what());
  }
  if (!doc.is_object()) throw SyntaxError("script document must be a JSON object");

  StoryScript script;
  if (auto it = doc.find("title"); it != doc.end()) {
    if (!it->is_string()) throw SyntaxError("field 'title' must be a string");
    script.title = it->get<std::string>();
  }

  const auto& names = require_field(doc, "characters", json::value_t::array);
  std::unordered_map<std::string, CharacterId> by_name;
  for (const auto& n : names) {
    if (!n.is_string()) throw SyntaxError("character names must be strings");
    auto name = n.get<std::string>();
    if (name.empty()) throw ValidationError("character names must be non-empty");
    const auto id = static_cast<CharacterId>(script.characters.size());
    if (!by_name.emplace(name, id).second) throw ValidationError("duplicate character '" + name + "'");
    script.characters.push_back({id, std::move(name)});
  }

  const auto& slots = require_field(doc, "slots", json::value_t::array);
  for (const auto& slot_doc : slots) {
    if (!slot_doc.is_array()) throw SyntaxError("each slot must be an array of sessions");
    Slot slot;
    for (const auto& session_doc : slot_doc) {
      if (!session_doc.is_array()) throw SyntaxError("each session must be an array of names");
      Session session;
      for (const auto& member : session_doc) {
        if (!member.is_string()) throw SyntaxError("session members must be names");
        const auto name = member.get<std::string>();
        auto found = by_name.find(name);
        if (found == by_name.end()) throw ValidationError("unknown character '" + name + "'");
        session.members.push_back(found->second);
      }
      std::sort(session.members.begin(), session.members.end());
      if (std::adjacent_find(session.members.begin(), session.members.end()) != session.members.end()) {
        throw ValidationError("character listed twice in one session at slot " +
                              std::to_string(script.slots.size()));
      }
      slot.push_back(std::move(session));
    }
    script.slots.push_back(std::move(slot));
  }

  validate_script(script);
  return script;
}

std::string serialize_script(const StoryScript& script) {
  json doc;
  doc["title"] = script.title;
  json names = json::array();
  for (const auto& c : script.characters) names.push_back(c.name);
  doc["characters"] = std::move(names);
  json slots = json::array();
  for (const auto& slot : script.slots) {
    json s = json::array();
    for (const auto& session : slot) {
      json members = json::array();
      for (CharacterId m : session.members) members.push_back(script.characters[static_cast<std::size_t>(m)].name);
      s.push_back(std::move(members));
    }
    slots.push_back(std::move(s));
  }
  doc["slots"] = std::move(slots);
  return doc.dump(2);
}

std::vector<CharacterId> active_set(const StoryScript& script, std::size_t slot) {
  if (slot >= script.slots.size()) {
    throw IndexError("slot " + std::to_string(slot) + " out of range");
  }
  std::vector<CharacterId> out;
  for (const auto& session : script.slots[slot]) {
    out.insert(out.end(), session.members.begin(), session.members.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int session_of(const StoryScript& script, std::size_t slot, CharacterId character) {
  if (slot >= script.slots.size()) throw IndexError("slot out of range");
  const auto& sessions = script.slots[slot];
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const auto& m = sessions[s].members;
    if (std::binary_search(m.begin(), m.end(), character)) return static_cast<int>(s);
  }
  return -1;
}

std::vector<std::vector<int>> session_table(const StoryScript& script) {
  std::vector<std::vector<int>> table(script.num_characters(), std::vector<int>(script.num_slots(), -1));
  for (std::size_t j = 0; j < script.slots.size(); ++j) {
    for (std::size_t s = 0; s < script.slots[j].size(); ++s) {
      for (CharacterId m : script.slots[j][s].members) table[static_cast<std::size_t>(m)][j] = static_cast<int>(s);
    }
  }
  return table;
}

CharacterId find_character(const StoryScript& script, std::string_view name) {
  for (const auto& c : script.characters) {
    if (c.name == name) return c.id;
  }
  throw IndexError("unknown character '" + std::string(name) + "'");
}

StoryScript load_script_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open script file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_script(buffer.str());
}

}  // namespace storyline
