#pragma once

#include "storyline/layout.hpp"

#include <optional>
#include <variant>
#include <vector>

#include "json.hpp"

namespace storyline {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Cells (character, slot) with slot_begin <= slot <= slot_end.
struct Segment {
  CharacterId character = 0;
  std::size_t slot_begin = 0;
  std::size_t slot_end = 0;
};

// Circular brush, explicit segments, or both (union).
struct Selection {
  std::optional<Point> center;
  double radius = 0.0;
  std::vector<Segment> segments;
};

// Polyline with strictly increasing x; evaluated by linear interpolation and
// held constant beyond its ends.
struct StrokePath {
  std::vector<Point> points;

  void validate() const;  // throws ValidationError
  double y_at(double x) const;
};

// Active cells picked by a selection, sorted by (slot, character).
std::vector<std::pair<CharacterId, std::size_t>> selected_cells(const Layout& layout, const Selection& sel);

// Ordering pairs against every neighbor the character passes on its way to
// target_rank. Throws IndexError.
std::vector<OrderingConstraint> shift(const Layout& layout, CharacterId character, std::size_t slot, int target_rank);

// Alignment{character, j, straight} for j in (j0, j1]. Throws IndexError when
// the character is inactive somewhere in [j0, j1].
std::vector<AlignmentConstraint> bend(const Layout& layout, CharacterId character, std::size_t j0, std::size_t j1,
                                      bool straight);

// Throws NotAdjacent, BadBounds.
CompactionConstraint scale(const Layout& layout, CharacterId first, CharacterId second, std::size_t slot, double d1,
                           double d2);

// Translates the selected cells at slot j by path(x_j) - path(x_first).
// Order and alignment of changed slots are re-derived from positions.
// Throws EmptySelection.
Layout transform(const Layout& layout, const Selection& sel, const StrokePath& path);

enum class Pull { kAttract, kRepel };

// Moves selected cells toward (attract) or away from (repel) the axis by
// `factor` of their distance. Throws EmptySelection, ValidationError.
Layout attract_repel(const Layout& layout, const Selection& sel, const StrokePath& axis, Pull mode,
                     double factor = 0.5);

// Appends a merged/twined mark covering the selected characters and slots.
// Throws EmptySelection when fewer than two characters are selected.
Layout relate(const Layout& layout, const Selection& group, StyleKind kind);

// Appends a stroke style or annotation. Throws IndexError for bad targets and
// ValidationError for malformed payloads.
Layout stylish(const Layout& layout, CharacterId character, std::size_t j0, std::size_t j1, StyleKind kind,
               const nlohmann::json& payload = nlohmann::json::object());

// After a geometric edit of `moved` cells: re-ranks their slots by y (ties by
// previous rank) and re-derives their indicators on the transitions entering
// and leaving the slot (1 where |dy| <= position tolerance).
void rederive_matrices(Layout& layout, const std::vector<std::pair<CharacterId, std::size_t>>& moved);

// --- interaction messages ---------------------------------------------------

struct ShiftMessage {
  CharacterId character = 0;
  std::size_t slot = 0;
  int target_rank = 0;
};
struct BendMessage {
  CharacterId character = 0;
  std::size_t slot_begin = 0;
  std::size_t slot_end = 0;
  bool straight = true;
};
struct ScaleMessage {
  CharacterId first = 0;
  CharacterId second = 0;
  std::size_t slot = 0;
  double d1 = 0.0;
  double d2 = 0.0;
};
struct TransformMessage {
  Selection selection;
  StrokePath path;
};
struct PullMessage {
  Selection selection;
  StrokePath axis;
  Pull mode = Pull::kAttract;
  double factor = 0.5;
};
struct RelateMessage {
  Selection selection;
  StyleKind kind = StyleKind::kMerged;
};
struct StylishMessage {
  CharacterId character = 0;
  std::size_t slot_begin = 0;
  std::size_t slot_end = 0;
  StyleKind kind = StyleKind::kDashed;
  nlohmann::json payload = nlohmann::json::object();
};

using InteractionMessage = std::variant<ShiftMessage, BendMessage, ScaleMessage, TransformMessage, PullMessage,
                                        RelateMessage, StylishMessage>;

// Throws SyntaxError for malformed messages.
InteractionMessage parse_interaction(const nlohmann::json& doc);
nlohmann::json interaction_to_json(const InteractionMessage& msg);

bool generates_constraints(const InteractionMessage& msg);

// Either new constraints (caller re-runs layout) or an edited layout.
struct InteractionResult {
  std::vector<NarrativeConstraint> constraints;
  std::optional<Layout> edited;
};

InteractionResult apply_interaction(const Layout& layout, const InteractionMessage& msg);

}  // namespace storyline
