#pragma once

#include "storyline/agent/policy.hpp"

#include <cstdint>
#include <optional>

namespace storyline::agent {

struct BaselineStep {
  std::optional<Action> action;  // nullopt: no candidate improved, no-op
  AgentState next;
  double reward = 0.0;
  int evaluated = 0;
};

// Draws up to n_candidates distinct valid actions uniformly over every
// (head, index) pair, simulates each and adopts the best strictly improving
// one. `accumulated` gains the adopted constraint.
BaselineStep greedy_baseline_step(const AgentState& state, const StoryScript& script,
                                  std::vector<NarrativeConstraint>& accumulated, const LayoutParams& params,
                                  int n_candidates, std::uint64_t seed, const ActionSpace& space = {},
                                  const RewardConfig& reward = {});

// K baseline steps, same trajectory layout as an agent episode. Its loss
// never increases.
Trajectory run_baseline_episode(const Layout& origin, const Layout& user, const StoryScript& script,
                                const EpisodeConfig& cfg, int n_candidates, const ActionSpace& space = {});

}  // namespace storyline::agent
