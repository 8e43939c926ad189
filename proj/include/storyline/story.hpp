#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace storyline {

using CharacterId = int;

struct Character {
  CharacterId id = 0;
  std::string name;

  friend bool operator==(const Character&, const Character&) = default;
};

// Characters present together in one scene at one time slot. Members are kept
// sorted ascending.
struct Session {
  std::vector<CharacterId> members;

  friend bool operator==(const Session&, const Session&) = default;
};

using Slot = std::vector<Session>;

struct StoryScript {
  std::string title;
  std::vector<Character> characters;
  std::vector<Slot> slots;

  std::size_t num_characters() const noexcept { return characters.size(); }
  std::size_t num_slots() const noexcept { return slots.size(); }

  friend bool operator==(const StoryScript&, const StoryScript&) = default;
};

// Parses the JSON script document
//   {"title": str, "characters": [str], "slots": [[[str]]]}
// Throws SyntaxError on malformed JSON or wrong shape, ValidationError on
// semantic violations (unknown or duplicate names, empty sessions, a character
// in two sessions of one slot, no characters, no slots).
StoryScript parse_script(std::string_view text);

std::string serialize_script(const StoryScript& script);

// Checks every StoryScript invariant; throws ValidationError.
void validate_script(const StoryScript& script);

// Sorted ids of every character present at `slot`. Throws IndexError.
std::vector<CharacterId> active_set(const StoryScript& script, std::size_t slot);

// Index of the session holding `character` at `slot`, or -1 when inactive.
int session_of(const StoryScript& script, std::size_t slot, CharacterId character);

// Per-slot character -> session index table (-1 when inactive), N x M.
std::vector<std::vector<int>> session_table(const StoryScript& script);

CharacterId find_character(const StoryScript& script, std::string_view name);

StoryScript load_script_file(const std::string& path);

}  // namespace storyline
