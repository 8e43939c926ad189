#pragma once

#include "storyline/layout.hpp"
#include "storyline/story.hpp"

#include <cstdint>
#include <vector>

namespace storyline {

// Instances whose C1-respecting order space is at most this large per slot
// pair are solved exactly by dynamic programming over slots; larger ones fall
// back to constrained barycenter sweeps.
struct OrderingLimits {
  std::size_t max_states_per_slot = 2000;
  std::size_t max_transition_work = 60000;
  int sweep_passes = 8;
};

// Ranks every active character at every slot. Members of one session occupy
// consecutive ranks and every ordering constraint holds. Throws
// ConstraintConflict for cyclic constraints, constraints that would split a
// session, or constraints naming characters inactive at their slot.
OrderMatrix compute_order(const StoryScript& script, const std::vector<OrderingConstraint>& constraints,
                          const OrderingLimits& limits = {});

// Crossings between two consecutive slot orders. Only characters active in
// both contribute.
std::int64_t transition_crossings(const OrderMatrix& order, std::size_t slot);

std::int64_t total_crossings(const OrderMatrix& order);

// Top-to-bottom character list at a slot.
std::vector<CharacterId> characters_by_rank(const OrderMatrix& order, std::size_t slot);

}  // namespace storyline
