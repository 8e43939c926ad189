#pragma once

#include "storyline/grid.hpp"
#include "storyline/story.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace storyline {

inline constexpr int kAbsent = -1;
inline constexpr double kAbsentPosition = std::numeric_limits<double>::quiet_NaN();

// rank of character i at slot j, or kAbsent.
using OrderMatrix = Grid<int>;
// 1 when character i is straight across slots j-1 and j, 0 otherwise, kAbsent
// when the character is inactive at j.
using AlignMatrix = Grid<int>;
// vertical coordinate in layout units (y grows downward), NaN when absent.
using PositionMatrix = Grid<double>;

struct LayoutParams {
  double inner_gap = 10.0;
  double outer_gap = 30.0;
  double slot_width = 100.0;
  double position_tolerance = 1e-6;

  // Throws ValidationError.
  void validate() const;

  friend bool operator==(const LayoutParams&, const LayoutParams&) = default;
};

// `ahead` ranks above (smaller rank) `behind` at `slot`.
struct OrderingConstraint {
  std::size_t slot = 0;
  CharacterId ahead = 0;
  CharacterId behind = 0;

  friend bool operator==(const OrderingConstraint&, const OrderingConstraint&) = default;
};

// Forces e[character][slot] to `value` (0 or 1).
struct AlignmentConstraint {
  CharacterId character = 0;
  std::size_t slot = 0;
  int value = 1;

  friend bool operator==(const AlignmentConstraint&, const AlignmentConstraint&) = default;
};

// d1 < |y[first][slot] - y[second][slot]| < d2.
struct CompactionConstraint {
  std::size_t slot = 0;
  CharacterId first = 0;
  CharacterId second = 0;
  double d1 = 0.0;
  double d2 = 0.0;

  friend bool operator==(const CompactionConstraint&, const CompactionConstraint&) = default;
};

using NarrativeConstraint = std::variant<OrderingConstraint, AlignmentConstraint, CompactionConstraint>;

std::string describe(const NarrativeConstraint& c);

struct PartitionedConstraints {
  std::vector<OrderingConstraint> ordering;
  std::vector<AlignmentConstraint> alignment;
  std::vector<CompactionConstraint> compaction;
};

PartitionedConstraints partition(const std::vector<NarrativeConstraint>& constraints);

enum class StyleKind { kMerged, kTwined, kDashed, kZigzag, kColor, kWidth, kAnnotation };

const char* to_string(StyleKind kind);
StyleKind style_kind_from_string(const std::string& name);

// Rendering-only decoration. `characters` holds one id for stroke styles and
// the whole group for merged/twined marks; the slot range is inclusive.
struct StyleMark {
  std::vector<CharacterId> characters;
  std::size_t slot_begin = 0;
  std::size_t slot_end = 0;
  StyleKind kind = StyleKind::kDashed;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const StyleMark&, const StyleMark&) = default;
};

struct Layout {
  OrderMatrix order;
  AlignMatrix align;
  PositionMatrix pos;
  std::vector<StyleMark> styles;
  std::vector<double> slot_x;
  LayoutParams params;

  std::size_t num_characters() const noexcept { return order.rows(); }
  std::size_t num_slots() const noexcept { return order.cols(); }
  bool active(std::size_t i, std::size_t j) const { return order(i, j) != kAbsent; }
};

// Bit-level equality of every field (NaN sentinels compare equal).
bool identical(const Layout& a, const Layout& b);

bool identical_positions(const PositionMatrix& a, const PositionMatrix& b);

}  // namespace storyline
