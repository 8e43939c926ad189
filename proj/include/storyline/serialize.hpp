#pragma once

#include "storyline/layout.hpp"

#include <vector>

#include "json.hpp"

namespace storyline {

// Layout document: order/align/pos as N x M arrays with null for absent cells,
// plus slot_x, params and styles. Throws SyntaxError on malformed input.
nlohmann::json layout_to_json(const Layout& layout);
Layout layout_from_json(const nlohmann::json& doc);

nlohmann::json params_to_json(const LayoutParams& params);
LayoutParams params_from_json(const nlohmann::json& doc);

// {"type": "ordering"|"alignment"|"compaction", ...}
nlohmann::json constraint_to_json(const NarrativeConstraint& c);
NarrativeConstraint constraint_from_json(const nlohmann::json& doc);
nlohmann::json constraints_to_json(const std::vector<NarrativeConstraint>& cs);
std::vector<NarrativeConstraint> constraints_from_json(const nlohmann::json& doc);

nlohmann::json style_to_json(const StyleMark& mark);
StyleMark style_from_json(const nlohmann::json& doc);

}  // namespace storyline
