#include "storyline/layout.hpp"

#include "storyline/errors.hpp"

#include <bit>
#include <cstdint>
#include <sstream>

namespace storyline {

void LayoutParams::validate() const {
  if (!(inner_gap > 0) || !(outer_gap > 0) || !(slot_width > 0) || !(position_tolerance > 0)) {
    throw ValidationError("layout parameters must be positive");
  }
  if (!(inner_gap < outer_gap)) throw ValidationError("inner_gap must be smaller than outer_gap");
}

std::string describe(const NarrativeConstraint& c) {
  std::ostringstream out;
  std::visit(
      [&out](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, OrderingConstraint>) {
          out << "ordering(slot=" << v.slot << ", ahead=" << v.ahead << ", behind=" << v.behind << ")";
        } else if constexpr (std::is_same_v<T, AlignmentConstraint>) {
          out << "alignment(character=" << v.character << ", slot=" << v.slot << ", value=" << v.value << ")";
        } else {
          out << "compaction(slot=" << v.slot << ", pair=(" << v.first << "," << v.second << "), bounds=("
              << v.d1 << "," << v.d2 << "))";
        }
      },
      c);
  return out.str();
}

PartitionedConstraints partition(const std::vector<NarrativeConstraint>& constraints) {
  PartitionedConstraints out;
  for (const auto& c : constraints) {
    if (const auto* o = std::get_if<OrderingConstraint>(&c)) {
      out.ordering.push_back(*o);
    } else if (const auto* a = std::get_if<AlignmentConstraint>(&c)) {
      out.alignment.push_back(*a);
    } else {
      out.compaction.push_back(std::get<CompactionConstraint>(c));
    }
  }
  return out;
}

const char* to_string(StyleKind kind) {
  switch (kind) {
    case StyleKind::kMerged: return "merged";
    case StyleKind::kTwined: return "twined";
    case StyleKind::kDashed: return "dashed";
    case StyleKind::kZigzag: return "zigzag";
    case StyleKind::kColor: return "color";
    case StyleKind::kWidth: return "width";
    case StyleKind::kAnnotation: return "annotation";
  }
  return "unknown";
}

StyleKind style_kind_from_string(const std::string& name) {
  for (auto k : {StyleKind::kMerged, StyleKind::kTwined, StyleKind::kDashed, StyleKind::kZigzag,
                 StyleKind::kColor, StyleKind::kWidth, StyleKind::kAnnotation}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown style kind '" + name + "'");
}

bool identical_positions(const PositionMatrix& a, const PositionMatrix& b) {
  if (!a.same_shape(b)) return false;
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t k = 0; k < da.size(); ++k) {
    if (std::bit_cast<std::uint64_t>(da[k]) != std::bit_cast<std::uint64_t>(db[k])) return false;
  }
  return true;
}

bool identical(const Layout& a, const Layout& b) {
  if (a.order != b.order || a.align != b.align || !identical_positions(a.pos, b.pos)) return false;
  if (a.params != b.params || a.styles != b.styles) return false;
  if (a.slot_x.size() != b.slot_x.size()) return false;
  for (std::size_t k = 0; k < a.slot_x.size(); ++k) {
    if (std::bit_cast<std::uint64_t>(a.slot_x[k]) != std::bit_cast<std::uint64_t>(b.slot_x[k])) return false;
  }
  return true;
}

}  // namespace storyline
