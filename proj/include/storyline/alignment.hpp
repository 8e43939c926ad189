#pragma once

#include "storyline/layout.hpp"
#include "storyline/story.hpp"

#include <vector>

namespace storyline {

struct AlignmentLimits {
  // Instances with at most this many candidate combinations over all
  // transitions are searched exhaustively (branch and bound).
  double max_exact_combinations = 2.0e5;
  std::size_t max_exact_common = 10;
};

// Chooses the straightened characters of every transition. A straightened
// set must keep its relative order across the transition and be realizable by
// the compaction stage (gaps between consecutive straightened lines must be
// attainable on both sides, and all straightened lines jointly feasible).
// The count of straightened indicators is maximized, forced indicators win.
// e[i][0] = 1 for every character active at slot 0.
// Throws ConstraintConflict for contradictory or unrealizable forced values.
AlignMatrix compute_alignment(const StoryScript& script, const OrderMatrix& order,
                              const std::vector<AlignmentConstraint>& constraints,
                              const LayoutParams& params = {},
                              const std::vector<CompactionConstraint>& compaction = {},
                              const AlignmentLimits& limits = {});

// Number of indicators equal to 1 on transitions j >= 1.
std::size_t straightened_count(const AlignMatrix& align);

}  // namespace storyline
