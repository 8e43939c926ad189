#include "storyline/interaction.hpp"

#include "storyline/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace storyline {

using nlohmann::json;

void StrokePath::validate() const {
  if (points.size() < 2) throw ValidationError("stroke path needs at least two points");
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!std::isfinite(points[k].x) || !std::isfinite(points[k].y)) throw ValidationError("stroke path must be finite");
    if (k > 0 && !(points[k].x > points[k - 1].x)) throw ValidationError("stroke path x must be strictly increasing");
  }
}

double StrokePath::y_at(double x) const {
  if (x <= points.front().x) return points.front().y;
  if (x >= points.back().x) return points.back().y;
  const auto it = std::upper_bound(points.begin(), points.end(), x, [](double v, const Point& p) { return v < p.x; });
  const Point& b = *it;
  const Point& a = *(it - 1);
  return a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);
}

namespace {

void require_character(const Layout& l, CharacterId c) {
  if (c < 0 || static_cast<std::size_t>(c) >= l.num_characters()) {
    throw IndexError("character id " + std::to_string(c) + " out of range");
  }
}

void require_slot(const Layout& l, std::size_t j) {
  if (j >= l.num_slots()) throw IndexError("slot " + std::to_string(j) + " out of range");
}

std::size_t active_count(const Layout& l, std::size_t j) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < l.num_characters(); ++i) k += l.active(i, j);
  return k;
}

}  // namespace

std::vector<std::pair<CharacterId, std::size_t>> selected_cells(const Layout& l, const Selection& sel) {
  std::set<std::pair<std::size_t, CharacterId>> picked;
  if (sel.center) {
    if (!(sel.radius > 0)) throw ValidationError("brush radius must be positive");
    for (std::size_t j = 0; j < l.num_slots(); ++j) {
      for (std::size_t i = 0; i < l.num_characters(); ++i) {
        if (!l.active(i, j)) continue;
        const double dx = l.slot_x[j] - sel.center->x;
        const double dy = l.pos(i, j) - sel.center->y;
        if (dx * dx + dy * dy <= sel.radius * sel.radius) picked.insert({j, static_cast<CharacterId>(i)});
      }
    }
  }
  for (const auto& s : sel.segments) {
    require_character(l, s.character);
    if (s.slot_begin > s.slot_end) throw ValidationError("segment slot range is reversed");
    require_slot(l, s.slot_end);
    for (std::size_t j = s.slot_begin; j <= s.slot_end; ++j) {
      if (l.active(static_cast<std::size_t>(s.character), j)) picked.insert({j, s.character});
    }
  }
  std::vector<std::pair<CharacterId, std::size_t>> out;
  for (const auto& [j, i] : picked) out.emplace_back(i, j);
  return out;
}

std::vector<OrderingConstraint> shift(const Layout& l, CharacterId character, std::size_t slot, int target_rank) {
  require_character(l, character);
  require_slot(l, slot);
  const auto c = static_cast<std::size_t>(character);
  if (!l.active(c, slot)) throw IndexError("character is inactive at the slot");
  if (target_rank < 0 || static_cast<std::size_t>(target_rank) >= active_count(l, slot)) {
    throw IndexError("target rank out of range");
  }
  const int current = l.order(c, slot);
  std::vector<OrderingConstraint> out;
  for (std::size_t i = 0; i < l.num_characters(); ++i) {
    const int r = l.order(i, slot);
    if (r == kAbsent || i == c) continue;
    if (target_rank < current && r >= target_rank && r < current) {
      out.push_back({slot, character, static_cast<CharacterId>(i)});
    } else if (target_rank > current && r > current && r <= target_rank) {
      out.push_back({slot, static_cast<CharacterId>(i), character});
    }
  }
  return out;
}

std::vector<AlignmentConstraint> bend(const Layout& l, CharacterId character, std::size_t j0, std::size_t j1,
                                      bool straight) {
  require_character(l, character);
  require_slot(l, j1);
  if (j0 > j1) throw IndexError("slot range is reversed");
  for (std::size_t j = j0; j <= j1; ++j) {
    if (!l.active(static_cast<std::size_t>(character), j)) throw IndexError("character inactive inside the range");
  }
  std::vector<AlignmentConstraint> out;
  for (std::size_t j = j0 + 1; j <= j1; ++j) out.push_back({character, j, straight ? 1 : 0});
  return out;
}

CompactionConstraint scale(const Layout& l, CharacterId first, CharacterId second, std::size_t slot, double d1,
                           double d2) {
  require_character(l, first);
  require_character(l, second);
  require_slot(l, slot);
  if (!(d1 >= 0.0) || !(d1 < d2) || !std::isfinite(d2)) throw BadBounds("scale bounds need 0 <= d1 < d2");
  const int a = l.order(static_cast<std::size_t>(first), slot);
  const int b = l.order(static_cast<std::size_t>(second), slot);
  if (a == kAbsent || b == kAbsent || std::abs(a - b) != 1) throw NotAdjacent("pair is not rank-adjacent at the slot");
  return {slot, first, second, d1, d2};
}

void rederive_matrices(Layout& l, const std::vector<std::pair<CharacterId, std::size_t>>& moved) {
  std::set<std::size_t> slots;
  for (const auto& [i, j] : moved) slots.insert(j);
  for (std::size_t j : slots) {
    std::vector<std::size_t> ranked;
    for (std::size_t i = 0; i < l.num_characters(); ++i) {
      if (l.active(i, j)) ranked.push_back(i);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      if (l.pos(a, j) != l.pos(b, j)) return l.pos(a, j) < l.pos(b, j);
      return l.order(a, j) < l.order(b, j);
    });
    for (std::size_t r = 0; r < ranked.size(); ++r) l.order(ranked[r], j) = static_cast<int>(r);
  }
  const double tol = l.params.position_tolerance;
  auto refresh = [&](std::size_t i, std::size_t j) {
    if (j == 0 || j >= l.num_slots() || !l.active(i, j)) return;
    if (!l.active(i, j - 1)) return;
    l.align(i, j) = std::abs(l.pos(i, j) - l.pos(i, j - 1)) <= tol ? 1 : 0;
  };
  for (const auto& [c, j] : moved) {
    const auto i = static_cast<std::size_t>(c);
    refresh(i, j);
    refresh(i, j + 1);
  }
}

Layout transform(const Layout& l, const Selection& sel, const StrokePath& path) {
  path.validate();
  const auto cells = selected_cells(l, sel);
  if (cells.empty()) throw EmptySelection("selection does not intersect any line");
  const std::size_t first = cells.front().second;
  const double base = path.y_at(l.slot_x[first]);
  Layout out = l;
  std::vector<std::pair<CharacterId, std::size_t>> moved;
  for (const auto& [c, j] : cells) {
    const double delta = path.y_at(l.slot_x[j]) - base;
    if (delta == 0.0) continue;
    out.pos(static_cast<std::size_t>(c), j) += delta;
    moved.emplace_back(c, j);
  }
  rederive_matrices(out, moved);
  return out;
}

Layout attract_repel(const Layout& l, const Selection& sel, const StrokePath& axis, Pull mode, double factor) {
  axis.validate();
  if (!(factor > 0.0) || !(factor <= 1.0)) throw ValidationError("factor must lie in (0, 1]");
  const auto cells = selected_cells(l, sel);
  if (cells.empty()) throw EmptySelection("selection does not intersect any line");
  Layout out = l;
  std::vector<std::pair<CharacterId, std::size_t>> moved;
  for (const auto& [c, j] : cells) {
    const auto i = static_cast<std::size_t>(c);
    const double target = axis.y_at(l.slot_x[j]);
    const double y = l.pos(i, j);
    const double next = mode == Pull::kAttract ? y + factor * (target - y) : y + factor * (y - target);
    if (next == y) continue;
    out.pos(i, j) = next;
    moved.emplace_back(c, j);
  }
  rederive_matrices(out, moved);
  return out;
}

Layout relate(const Layout& l, const Selection& group, StyleKind kind) {
  if (kind != StyleKind::kMerged && kind != StyleKind::kTwined) throw ValidationError("relate needs merged or twined");
  const auto cells = selected_cells(l, group);
  std::set<CharacterId> chars;
  std::size_t lo = l.num_slots(), hi = 0;
  for (const auto& [c, j] : cells) {
    chars.insert(c);
    lo = std::min(lo, j);
    hi = std::max(hi, j);
  }
  if (chars.size() < 2) throw EmptySelection("relating needs at least two characters");
  Layout out = l;
  out.styles.push_back({std::vector<CharacterId>(chars.begin(), chars.end()), lo, hi, kind, json::object()});
  return out;
}

namespace {

void validate_payload(StyleKind kind, const json& payload) {
  if (!payload.is_object()) throw ValidationError("style payload must be an object");
  auto number = [&](const char* key, bool required) {
    if (!payload.contains(key)) {
      if (required) throw ValidationError(std::string("payload needs '") + key + "'");
      return;
    }
    if (!payload[key].is_number() || !(payload[key].get<double>() > 0)) {
      throw ValidationError(std::string("payload '") + key + "' must be a positive number");
    }
  };
  switch (kind) {
    case StyleKind::kDashed:
      number("dash", false);
      number("gap", false);
      break;
    case StyleKind::kZigzag:
      number("amplitude", false);
      number("period", false);
      break;
    case StyleKind::kColor:
      if (!payload.contains("color") || !payload["color"].is_string() || payload["color"].get<std::string>().empty()) {
        throw ValidationError("color payload needs a 'color' string");
      }
      break;
    case StyleKind::kWidth:
      number("width", true);
      break;
    case StyleKind::kAnnotation: {
      const bool text = payload.contains("text") && payload["text"].is_string();
      const bool icon = payload.contains("icon") && payload["icon"].is_string();
      if (!text && !icon) throw ValidationError("annotation payload needs 'text' or 'icon'");
      for (const char* key : {"x", "y"}) {
        if (payload.contains(key) && !payload[key].is_number()) {
          throw ValidationError(std::string("annotation '") + key + "' must be a number");
        }
      }
      break;
    }
    default:
      throw ValidationError("stylish does not accept merged or twined");
  }
}

}  // namespace

Layout stylish(const Layout& l, CharacterId character, std::size_t j0, std::size_t j1, StyleKind kind,
               const json& payload) {
  require_character(l, character);
  require_slot(l, j1);
  if (j0 > j1) throw IndexError("slot range is reversed");
  validate_payload(kind, payload);
  Layout out = l;
  out.styles.push_back({{character}, j0, j1, kind, payload});
  return out;
}

// --- messages ----------------------------------------------------------------

namespace {

template <typename T>
T get(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw SyntaxError(std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw SyntaxError(std::string("field '") + key + "' has the wrong type");
  }
}

std::vector<Point> points_from_json(const json& doc, const char* key) {
  std::vector<Point> out;
  for (const auto& p : get<json>(doc, key)) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw SyntaxError(std::string("'") + key + "' must be a list of [x, y] pairs");
    }
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

json points_to_json(const std::vector<Point>& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back({p.x, p.y});
  return out;
}

Selection selection_from_json(const json& doc) {
  if (!doc.is_object()) throw SyntaxError("selection must be an object");
  Selection s;
  if (doc.contains("center")) {
    const auto c = get<std::vector<double>>(doc, "center");
    if (c.size() != 2) throw SyntaxError("center must be [x, y]");
    s.center = Point{c[0], c[1]};
    s.radius = get<double>(doc, "radius");
  }
  if (doc.contains("segments")) {
    for (const auto& seg : get<json>(doc, "segments")) {
      s.segments.push_back({get<int>(seg, "character"), get<std::size_t>(seg, "slot_begin"),
                            get<std::size_t>(seg, "slot_end")});
    }
  }
  return s;
}

json selection_to_json(const Selection& s) {
  json out = json::object();
  if (s.center) {
    out["center"] = {s.center->x, s.center->y};
    out["radius"] = s.radius;
  }
  if (!s.segments.empty()) {
    json segs = json::array();
    for (const auto& g : s.segments) {
      segs.push_back({{"character", g.character}, {"slot_begin", g.slot_begin}, {"slot_end", g.slot_end}});
    }
    out["segments"] = segs;
  }
  return out;
}

StyleKind kind_field(const json& doc) {
  try {
    return style_kind_from_string(get<std::string>(doc, "kind"));
  } catch (const ValidationError& e) {
    throw SyntaxError(e.what());
  }
}

}  // namespace

InteractionMessage parse_interaction(const json& doc) {
  const auto type = get<std::string>(doc, "type");
  if (type == "shift") {
    return ShiftMessage{get<int>(doc, "character"), get<std::size_t>(doc, "slot"), get<int>(doc, "target_rank")};
  }
  if (type == "bend") {
    return BendMessage{get<int>(doc, "character"), get<std::size_t>(doc, "slot_begin"),
                       get<std::size_t>(doc, "slot_end"), doc.value("straight", true)};
  }
  if (type == "scale") {
    const auto pair = get<std::vector<int>>(doc, "pair");
    const auto bounds = get<std::vector<double>>(doc, "bounds");
    if (pair.size() != 2 || bounds.size() != 2) throw SyntaxError("scale needs 'pair' and 'bounds' of length 2");
    return ScaleMessage{pair[0], pair[1], get<std::size_t>(doc, "slot"), bounds[0], bounds[1]};
  }
  if (type == "transform") {
    return TransformMessage{selection_from_json(get<json>(doc, "selection")), {points_from_json(doc, "path")}};
  }
  if (type == "attract" || type == "repel") {
    PullMessage m;
    m.selection = selection_from_json(get<json>(doc, "selection"));
    m.axis.points = points_from_json(doc, "axis");
    m.mode = type == "attract" ? Pull::kAttract : Pull::kRepel;
    m.factor = doc.value("factor", 0.5);
    return m;
  }
  if (type == "relate") return RelateMessage{selection_from_json(get<json>(doc, "selection")), kind_field(doc)};
  if (type == "stylish") {
    return StylishMessage{get<int>(doc, "character"), get<std::size_t>(doc, "slot_begin"),
                          get<std::size_t>(doc, "slot_end"), kind_field(doc), doc.value("payload", json::object())};
  }
  throw SyntaxError("unknown interaction type '" + type + "'");
}

json interaction_to_json(const InteractionMessage& msg) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ShiftMessage>) {
          return {{"type", "shift"}, {"character", m.character}, {"slot", m.slot}, {"target_rank", m.target_rank}};
        } else if constexpr (std::is_same_v<T, BendMessage>) {
          return {{"type", "bend"},
                  {"character", m.character},
                  {"slot_begin", m.slot_begin},
                  {"slot_end", m.slot_end},
                  {"straight", m.straight}};
        } else if constexpr (std::is_same_v<T, ScaleMessage>) {
          return {{"type", "scale"}, {"pair", {m.first, m.second}}, {"slot", m.slot}, {"bounds", {m.d1, m.d2}}};
        } else if constexpr (std::is_same_v<T, TransformMessage>) {
          return {{"type", "transform"}, {"selection", selection_to_json(m.selection)}, {"path", points_to_json(m.path.points)}};
        } else if constexpr (std::is_same_v<T, PullMessage>) {
          return {{"type", m.mode == Pull::kAttract ? "attract" : "repel"},
                  {"selection", selection_to_json(m.selection)},
                  {"axis", points_to_json(m.axis.points)},
                  {"factor", m.factor}};
        } else if constexpr (std::is_same_v<T, RelateMessage>) {
          return {{"type", "relate"}, {"selection", selection_to_json(m.selection)}, {"kind", to_string(m.kind)}};
        } else {
          return {{"type", "stylish"},
                  {"character", m.character},
                  {"slot_begin", m.slot_begin},
                  {"slot_end", m.slot_end},
                  {"kind", to_string(m.kind)},
                  {"payload", m.payload}};
        }
      },
      msg);
}

bool generates_constraints(const InteractionMessage& msg) {
  return std::holds_alternative<ShiftMessage>(msg) || std::holds_alternative<BendMessage>(msg) ||
         std::holds_alternative<ScaleMessage>(msg);
}

InteractionResult apply_interaction(const Layout& l, const InteractionMessage& msg) {
  InteractionResult r;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ShiftMessage>) {
          for (const auto& c : shift(l, m.character, m.slot, m.target_rank)) r.constraints.emplace_back(c);
        } else if constexpr (std::is_same_v<T, BendMessage>) {
          for (const auto& c : bend(l, m.character, m.slot_begin, m.slot_end, m.straight)) r.constraints.emplace_back(c);
        } else if constexpr (std::is_same_v<T, ScaleMessage>) {
          r.constraints.emplace_back(scale(l, m.first, m.second, m.slot, m.d1, m.d2));
        } else if constexpr (std::is_same_v<T, TransformMessage>) {
          r.edited = transform(l, m.selection, m.path);
        } else if constexpr (std::is_same_v<T, PullMessage>) {
          r.edited = attract_repel(l, m.selection, m.axis, m.mode, m.factor);
        } else if constexpr (std::is_same_v<T, RelateMessage>) {
          r.edited = relate(l, m.selection, m.kind);
        } else {
          r.edited = stylish(l, m.character, m.slot_begin, m.slot_end, m.kind, m.payload);
        }
      },
      msg);
  return r;
}

}  // namespace storyline
