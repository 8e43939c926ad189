#include "storyline/serialize.hpp"

#include "storyline/errors.hpp"

#include <cmath>

namespace storyline {

namespace {

using nlohmann::json;

template <typename T>
json grid_to_json(const Grid<T>& g, auto is_absent) {
  json rows = json::array();
  for (std::size_t i = 0; i < g.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < g.cols(); ++j) {
      if (is_absent(g(i, j))) {
        row.push_back(nullptr);
      } else {
        row.push_back(g(i, j));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
Grid<T> grid_from_json(const json& doc, const char* name, T absent) {
  if (!doc.is_array()) throw SyntaxError(std::string(name) + " must be an array of rows");
  const std::size_t n = doc.size();
  const std::size_t m = n ? doc[0].size() : 0;
  Grid<T> g(n, m, absent);
  for (std::size_t i = 0; i < n; ++i) {
    if (!doc[i].is_array() || doc[i].size() != m) throw SyntaxError(std::string(name) + " rows must have equal length");
    for (std::size_t j = 0; j < m; ++j) {
      const auto& v = doc[i][j];
      if (v.is_null()) continue;
      if (!v.is_number()) throw SyntaxError(std::string(name) + " entries must be numbers or null");
      g(i, j) = v.get<T>();
    }
  }
  return g;
}

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) throw SyntaxError(std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw SyntaxError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

json params_to_json(const LayoutParams& p) {
  return {{"inner_gap", p.inner_gap},
          {"outer_gap", p.outer_gap},
          {"slot_width", p.slot_width},
          {"position_tolerance", p.position_tolerance}};
}

LayoutParams params_from_json(const json& doc) {
  if (!doc.is_object()) throw SyntaxError("params must be an object");
  LayoutParams p;
  p.inner_gap = doc.value("inner_gap", p.inner_gap);
  p.outer_gap = doc.value("outer_gap", p.outer_gap);
  p.slot_width = doc.value("slot_width", p.slot_width);
  p.position_tolerance = doc.value("position_tolerance", p.position_tolerance);
  return p;
}

json style_to_json(const StyleMark& s) {
  return {{"characters", s.characters},
          {"slot_begin", s.slot_begin},
          {"slot_end", s.slot_end},
          {"kind", to_string(s.kind)},
          {"payload", s.payload}};
}

StyleMark style_from_json(const json& doc) {
  if (!doc.is_object()) throw SyntaxError("style mark must be an object");
  StyleMark s;
  s.characters = field<std::vector<CharacterId>>(doc, "characters");
  s.slot_begin = field<std::size_t>(doc, "slot_begin");
  s.slot_end = field<std::size_t>(doc, "slot_end");
  try {
    s.kind = style_kind_from_string(field<std::string>(doc, "kind"));
  } catch (const ValidationError& e) {
    throw SyntaxError(e.what());
  }
  s.payload = doc.value("payload", json::object());
  return s;
}

json layout_to_json(const Layout& l) {
  json styles = json::array();
  for (const auto& s : l.styles) styles.push_back(style_to_json(s));
  return {{"order", grid_to_json(l.order, [](int v) { return v == kAbsent; })},
          {"align", grid_to_json(l.align, [](int v) { return v == kAbsent; })},
          {"pos", grid_to_json(l.pos, [](double v) { return std::isnan(v); })},
          {"slot_x", l.slot_x},
          {"params", params_to_json(l.params)},
          {"styles", styles}};
}

Layout layout_from_json(const json& doc) {
  if (!doc.is_object()) throw SyntaxError("layout must be an object");
  Layout l;
  l.order = grid_from_json<int>(doc.value("order", json()), "order", kAbsent);
  l.align = grid_from_json<int>(doc.value("align", json()), "align", kAbsent);
  l.pos = grid_from_json<double>(doc.value("pos", json()), "pos", kAbsentPosition);
  if (!l.align.same_shape(l.order) || !l.pos.same_shape(l.order)) {
    throw SyntaxError("order, align and pos must share dimensions");
  }
  l.slot_x = field<std::vector<double>>(doc, "slot_x");
  if (l.slot_x.size() != l.order.cols()) throw SyntaxError("slot_x length must equal the slot count");
  if (doc.contains("params")) l.params = params_from_json(doc["params"]);
  if (doc.contains("styles")) {
    if (!doc["styles"].is_array()) throw SyntaxError("styles must be an array");
    for (const auto& s : doc["styles"]) l.styles.push_back(style_from_json(s));
  }
  return l;
}

json constraint_to_json(const NarrativeConstraint& c) {
  if (const auto* o = std::get_if<OrderingConstraint>(&c)) {
    return {{"type", "ordering"}, {"slot", o->slot}, {"ahead", o->ahead}, {"behind", o->behind}};
  }
  if (const auto* a = std::get_if<AlignmentConstraint>(&c)) {
    return {{"type", "alignment"}, {"character", a->character}, {"slot", a->slot}, {"value", a->value}};
  }
  const auto& k = std::get<CompactionConstraint>(c);
  return {{"type", "compaction"}, {"slot", k.slot}, {"first", k.first}, {"second", k.second},
          {"d1", k.d1},           {"d2", k.d2}};
}

NarrativeConstraint constraint_from_json(const json& doc) {
  if (!doc.is_object()) throw SyntaxError("constraint must be an object");
  const auto type = field<std::string>(doc, "type");
  if (type == "ordering") {
    return OrderingConstraint{field<std::size_t>(doc, "slot"), field<int>(doc, "ahead"), field<int>(doc, "behind")};
  }
  if (type == "alignment") {
    return AlignmentConstraint{field<int>(doc, "character"), field<std::size_t>(doc, "slot"), field<int>(doc, "value")};
  }
  if (type == "compaction") {
    return CompactionConstraint{field<std::size_t>(doc, "slot"), field<int>(doc, "first"), field<int>(doc, "second"),
                                field<double>(doc, "d1"), field<double>(doc, "d2")};
  }
  throw SyntaxError("unknown constraint type '" + type + "'");
}

json constraints_to_json(const std::vector<NarrativeConstraint>& cs) {
  json out = json::array();
  for (const auto& c : cs) out.push_back(constraint_to_json(c));
  return out;
}

std::vector<NarrativeConstraint> constraints_from_json(const json& doc) {
  if (!doc.is_array()) throw SyntaxError("constraints must be an array");
  std::vector<NarrativeConstraint> out;
  for (const auto& c : doc) out.push_back(constraint_from_json(c));
  return out;
}

}  // namespace storyline
