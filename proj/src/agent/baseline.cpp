#include "storyline/agent/baseline.hpp"

#include "storyline/errors.hpp"

#include <algorithm>
#include <random>

namespace storyline::agent {

BaselineStep greedy_baseline_step(const AgentState& state, const StoryScript& script,
                                  std::vector<NarrativeConstraint>& accumulated, const LayoutParams& params,
                                  int n_candidates, std::uint64_t seed, const ActionSpace& space,
                                  const RewardConfig& reward) {
  if (n_candidates < 1) throw ValidationError("n_candidates must be at least 1");
  BaselineStep out;
  out.next = state;
  out.next.k = state.k + 1;

  struct Candidate {
    Head head;
    int index;
    NarrativeConstraint constraint;
  };
  std::vector<Candidate> pool;
  for (Head h : kHeads) {
    std::vector<std::optional<NarrativeConstraint>> decoded;
    const auto mask = valid_mask(space, state.current, h, accumulated, &decoded);
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (mask[k]) pool.push_back({h, static_cast<int>(k), *decoded[k]});
    }
  }
  std::mt19937_64 rng(seed);
  const auto take = std::min(pool.size(), static_cast<std::size_t>(n_candidates));
  // Partial Fisher-Yates: the first `take` entries become a uniform sample.
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }

  const double before = combined_loss(state.current, state.target, reward);
  double best = 0.0;
  std::optional<Transition> best_t;
  for (std::size_t k = 0; k < take; ++k) {
    auto acc = accumulated;
    Transition t = transition(state, pool[k].constraint, script, acc, params);
    ++out.evaluated;
    if (!t.applied) continue;
    const double r = step_reward(before, combined_loss(t.next.current, state.target, reward));
    if (r > best) {
      best = r;
      out.action = Action{pool[k].head, pool[k].index, pool[k].constraint};
      best_t = std::move(t);
    }
  }
  if (out.action) {
    accumulated.push_back(out.action->constraint);
    out.next = std::move(best_t->next);
    out.reward = best;
  }
  return out;
}

Trajectory run_baseline_episode(const Layout& origin, const Layout& user, const StoryScript& script,
                                const EpisodeConfig& cfg, int n_candidates, const ActionSpace& space) {
  cfg.validate();
  Trajectory t;
  t.snapshots.push_back(origin);
  t.losses.push_back(combined_loss(origin, user, cfg.reward));
  AgentState state{origin, user, 0};
  std::mt19937_64 seeds(cfg.seed);
  for (int k = 0; k < cfg.K; ++k) {
    if (t.losses.back() == 0.0) break;
    BaselineStep b = greedy_baseline_step(state, script, t.accumulated, origin.params, n_candidates, seeds(), space,
                                          cfg.reward);
    Step s;
    s.k = k;
    s.applied = b.action.has_value();
    if (b.action) {
      s.head = b.action->head;
      s.index = b.action->index;
      s.constraint = b.action->constraint;
    }
    s.reward = b.reward;
    state = std::move(b.next);
    t.snapshots.push_back(state.current);
    t.losses.push_back(combined_loss(state.current, user, cfg.reward));
    t.steps.push_back(std::move(s));
  }
  return t;
}

}  // namespace storyline::agent
