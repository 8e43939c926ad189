#pragma once

#include "storyline/layout.hpp"
#include "storyline/story.hpp"

#include <vector>

namespace storyline {

// Vertical positions minimizing the sum of squared wiggles subject to the
// session gaps, the straightened segments of `align` and the compaction
// bounds. The result is shifted so the topmost active cell sits at 0.
// Throws InfeasibleConstraints naming the conflicting constraints.
PositionMatrix compute_positions(const StoryScript& script, const OrderMatrix& order, const AlignMatrix& align,
                                 const std::vector<CompactionConstraint>& constraints,
                                 const LayoutParams& params = {});

// Sum over active transitions of (y[i][j] - y[i][j-1])^2.
double squared_wiggle(const PositionMatrix& pos);

}  // namespace storyline
