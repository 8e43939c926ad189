#pragma once

#include "storyline/layout.hpp"
#include "storyline/story.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace storyline {

// Ordering, alignment and compaction in sequence. slot_x[j] = j * slot_width.
Layout layout(const StoryScript& script, const std::vector<NarrativeConstraint>& constraints,
              const LayoutParams& params = {});

std::int64_t count_crossings(const Layout& layout);
double count_wiggles(const Layout& layout);
double measure_whitespace(const Layout& layout);

// Every structural violation of `layout` with respect to the script (shape,
// sentinels, C1, C2, alignment semantics) and the listed constraints. Empty
// when the layout is valid.
std::vector<std::string> check_layout(const StoryScript& script, const Layout& layout,
                                      const std::vector<NarrativeConstraint>& constraints = {});

}  // namespace storyline
