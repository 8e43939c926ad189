#pragma once

#include "storyline/agent/action_space.hpp"
#include "storyline/agent/encoder.hpp"
#include "storyline/agent/network.hpp"
#include "storyline/reward.hpp"
#include "storyline/story.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace storyline::agent {

struct EpisodeConfig {
  int K = 15;
  RewardConfig reward;
  std::uint64_t seed = 0;

  void validate() const;  // throws ValidationError
};

nlohmann::json to_json(const EpisodeConfig& c);
EpisodeConfig episode_config_from_json(const nlohmann::json& doc);

// Network plus the encoding and action space it was built for.
struct Policy {
  ActionSpace space;
  int H = 100;
  ModelParams params;

  static Policy create(const ActionSpace& space, int H, const std::vector<int>& widths, std::uint64_t seed);
  static NetworkConfig network_config(const ActionSpace& space, int H, const std::vector<int>& widths);
};

// Non-owning view so episodes can run against shared parameters.
struct PolicyView {
  const ActionSpace& space;
  int H;
  const ModelParams& params;

  PolicyView(const ActionSpace& s, int h, const ModelParams& p) : space(s), H(h), params(p) {}
  PolicyView(const Policy& p) : space(p.space), H(p.H), params(p.params) {}
};

enum class Mode { kGreedy, kSample };

// Per-head distributions restricted to valid actions.
struct PolicyOutput {
  std::array<Eigen::VectorXd, 3> probs;
  double value = 0.0;
};

PolicyOutput policy_forward(const ModelParams& params, const Eigen::VectorXd& input,
                            const std::array<std::vector<char>, 3>& masks = {});
double value_forward(const ModelParams& params, const Eigen::VectorXd& input);

// Result of applying one constraint to a state.
struct Transition {
  AgentState next;
  bool applied = false;  // false: conflict, dropped as a no-op
};

// Appends the constraint to `accumulated` and re-runs the layout engine. A
// conflicting constraint is dropped and the current layout kept.
Transition transition(const AgentState& state, const NarrativeConstraint& constraint, const StoryScript& script,
                      std::vector<NarrativeConstraint>& accumulated, const LayoutParams& params);

struct Choice {
  Action action;
  Transition result;
  double reward = 0.0;
};

// What select_action evaluated, kept for the learner.
struct Decision {
  Eigen::VectorXd input;
  std::array<std::vector<char>, 3> masks;
  double value = 0.0;
  Choice choice;
};

// One candidate per head (top-1 or sampled), each simulated one step; the
// highest one-step reward wins, earlier heads on ties. Throws NoValidAction.
Decision select_action(PolicyView policy, const AgentState& state, const StoryScript& script,
                       const std::vector<NarrativeConstraint>& accumulated, const EpisodeConfig& cfg, Mode mode,
                       std::mt19937_64& rng);

struct Step {
  int k = 0;
  Head head = Head::kShift;
  int index = 0;
  NarrativeConstraint constraint;
  bool applied = false;
  double reward = 0.0;
  double value = 0.0;
  Eigen::VectorXd input;
  std::array<std::vector<char>, 3> masks;
};

struct Trajectory {
  std::vector<Step> steps;
  std::vector<Layout> snapshots;  // steps.size() + 1 layouts, starting with the origin
  std::vector<double> losses;     // loss of each snapshot against the user layout
  std::vector<NarrativeConstraint> accumulated;
  bool stopped = false;

  const Layout& final_layout() const { return snapshots.back(); }
  double final_loss() const { return losses.back(); }
  std::vector<double> rewards() const;
};

// Runs at most K steps, stopping early once the loss reaches 0 or nothing
// valid remains. `stop` (optional) is polled between steps.
Trajectory run_episode(PolicyView policy, const Layout& origin, const Layout& user, const StoryScript& script,
                       const EpisodeConfig& cfg, Mode mode, const std::atomic<bool>* stop = nullptr);

}  // namespace storyline::agent
