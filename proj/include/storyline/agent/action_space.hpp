#pragma once

#include "storyline/layout.hpp"

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "json.hpp"

namespace storyline::agent {

enum class Head { kShift = 0, kBend = 1, kScale = 2 };
inline constexpr std::array<Head, 3> kHeads{Head::kShift, Head::kBend, Head::kScale};
const char* to_string(Head h);

// Discretized parameters of the three interaction heads.
//   shift: (slot bucket, character, direction up/down)
//   bend:  (character, slot bucket, value 0/1)
//   scale: (slot bucket, rank-adjacent pair index, bound bucket)
struct ActionSpace {
  int max_characters = 10;
  int slot_buckets = 8;
  std::vector<std::pair<double, double>> bounds{{20.0, 40.0}, {40.0, 80.0}, {80.0, 160.0}, {5.0, 15.0}};

  int head_size(Head h) const;
  void validate() const;  // throws ValidationError

  // Slots covered by a bucket for a script with `slots` time slots.
  std::pair<std::size_t, std::size_t> bucket_range(int bucket, std::size_t slots) const;

  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;
};

nlohmann::json to_json(const ActionSpace& space);
ActionSpace action_space_from_json(const nlohmann::json& doc);

struct Action {
  Head head = Head::kShift;
  int index = 0;
  NarrativeConstraint constraint;
};

// Decodes one head index against the current layout. The slot inside the
// bucket is the first one where the action is applicable and changes the
// layout's corresponding matrix entry (a one-rank move, an indicator flip, a
// gap moved into the bound). Returns nullopt when nothing applies.
std::optional<NarrativeConstraint> decode(const ActionSpace& space, const Layout& layout, Head head, int index);

// valid[k] != 0 when index k decodes to a constraint that is not already in
// `accumulated`. `decoded` receives the constraints (unset where invalid).
std::vector<char> valid_mask(const ActionSpace& space, const Layout& layout, Head head,
                             const std::vector<NarrativeConstraint>& accumulated,
                             std::vector<std::optional<NarrativeConstraint>>* decoded = nullptr);

}  // namespace storyline::agent
