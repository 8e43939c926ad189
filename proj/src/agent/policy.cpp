#include "storyline/agent/policy.hpp"

#include "storyline/engine.hpp"
#include "storyline/errors.hpp"

#include <algorithm>
#include <cmath>

namespace storyline::agent {

void EpisodeConfig::validate() const {
  if (K < 1) throw ValidationError("episode length K must be at least 1");
  reward.validate();
}

nlohmann::json to_json(const EpisodeConfig& c) {
  return {{"K", c.K},
          {"seed", c.seed},
          {"reward", {{"w1", c.reward.w1}, {"w2", c.reward.w2}, {"w3", c.reward.w3}, {"gamma", c.reward.gamma}}}};
}

EpisodeConfig episode_config_from_json(const nlohmann::json& doc) {
  EpisodeConfig c;
  try {
    c.K = doc.value("K", c.K);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("reward")) {
      const auto& r = doc.at("reward");
      c.reward.w1 = r.value("w1", c.reward.w1);
      c.reward.w2 = r.value("w2", c.reward.w2);
      c.reward.w3 = r.value("w3", c.reward.w3);
      c.reward.gamma = r.value("gamma", c.reward.gamma);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SyntaxError(std::string("bad episode config: ") + e.what());
  }
  c.validate();
  return c;
}

NetworkConfig Policy::network_config(const ActionSpace& space, int H, const std::vector<int>& widths) {
  NetworkConfig nc;
  nc.input_size = encoded_size(H);
  nc.widths = widths;
  for (Head h : kHeads) nc.head_sizes[static_cast<std::size_t>(h)] = space.head_size(h);
  return nc;
}

Policy Policy::create(const ActionSpace& space, int H, const std::vector<int>& widths, std::uint64_t seed) {
  space.validate();
  if (H < 2) throw ValidationError("grid side must be at least 2");
  return Policy{space, H, ModelParams::initialize(network_config(space, H, widths), seed)};
}

PolicyOutput policy_forward(const ModelParams& params, const Eigen::VectorXd& input,
                            const std::array<std::vector<char>, 3>& masks) {
  if (!params.finite()) throw ValidationError("policy parameters are not finite");
  const ForwardCache c = forward(params, input);
  PolicyOutput out;
  for (std::size_t h = 0; h < 3; ++h) out.probs[h] = masked_softmax(c.logits[h].col(0), masks[h]);
  out.value = c.value(0);
  return out;
}

double value_forward(const ModelParams& params, const Eigen::VectorXd& input) {
  return policy_forward(params, input).value;
}

Transition transition(const AgentState& state, const NarrativeConstraint& constraint, const StoryScript& script,
                      std::vector<NarrativeConstraint>& accumulated, const LayoutParams& params) {
  Transition t;
  t.next.target = state.target;
  t.next.k = state.k + 1;
  accumulated.push_back(constraint);
  try {
    t.next.current = layout(script, accumulated, params);
    t.applied = true;
  } catch (const ConstraintConflict&) {
    accumulated.pop_back();
  } catch (const InfeasibleConstraints&) {
    accumulated.pop_back();
  }
  if (!t.applied) t.next.current = state.current;
  return t;
}

namespace {

int argmax_valid(const Eigen::VectorXd& p, const std::vector<char>& mask) {
  int best = -1;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (!mask[static_cast<std::size_t>(k)]) continue;
    if (best < 0 || p(k) > p(best)) best = static_cast<int>(k);
  }
  return best;
}

int sample_valid(const Eigen::VectorXd& p, const std::vector<char>& mask, std::mt19937_64& rng) {
  if (std::none_of(mask.begin(), mask.end(), [](char c) { return c != 0; })) return -1;
  std::vector<double> w(static_cast<std::size_t>(p.size()));
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = mask[k] ? p(static_cast<Eigen::Index>(k)) : 0.0;
  // An underflowed distribution still has valid entries to choose from.
  if (std::all_of(w.begin(), w.end(), [](double v) { return v <= 0.0; })) {
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = mask[k] ? 1.0 : 0.0;
  }
  std::discrete_distribution<int> dist(w.begin(), w.end());
  return dist(rng);
}

}  // namespace

Decision select_action(PolicyView policy, const AgentState& state, const StoryScript& script,
                       const std::vector<NarrativeConstraint>& accumulated, const EpisodeConfig& cfg, Mode mode,
                       std::mt19937_64& rng) {
  Decision d;
  std::array<std::vector<std::optional<NarrativeConstraint>>, 3> decoded;
  for (Head h : kHeads) {
    const auto hi = static_cast<std::size_t>(h);
    d.masks[hi] = valid_mask(policy.space, state.current, h, accumulated, &decoded[hi]);
  }
  d.input = encode_state(state, policy.H, cfg.K).flatten();
  const PolicyOutput out = policy_forward(policy.params, d.input, d.masks);
  d.value = out.value;

  const double before = combined_loss(state.current, state.target, cfg.reward);
  bool found = false;
  for (Head h : kHeads) {
    const auto hi = static_cast<std::size_t>(h);
    const int index = mode == Mode::kGreedy ? argmax_valid(out.probs[hi], d.masks[hi])
                                            : sample_valid(out.probs[hi], d.masks[hi], rng);
    if (index < 0) continue;
    const NarrativeConstraint c = *decoded[hi][static_cast<std::size_t>(index)];
    auto acc = accumulated;
    Transition t = transition(state, c, script, acc, state.current.params);
    const double reward = t.applied ? step_reward(before, combined_loss(t.next.current, state.target, cfg.reward)) : 0.0;
    if (!found || reward > d.choice.reward) {
      d.choice = Choice{Action{h, index, c}, std::move(t), reward};
      found = true;
    }
  }
  if (!found) throw NoValidAction("no head has a valid action in this state");
  return d;
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> r;
  r.reserve(steps.size());
  for (const auto& s : steps) r.push_back(s.reward);
  return r;
}

Trajectory run_episode(PolicyView policy, const Layout& origin, const Layout& user, const StoryScript& script,
                       const EpisodeConfig& cfg, Mode mode, const std::atomic<bool>* stop) {
  cfg.validate();
  Trajectory t;
  t.snapshots.push_back(origin);
  t.losses.push_back(combined_loss(origin, user, cfg.reward));
  AgentState state{origin, user, 0};
  std::mt19937_64 rng(cfg.seed);
  for (int k = 0; k < cfg.K; ++k) {
    if (stop != nullptr && stop->load()) {
      t.stopped = true;
      break;
    }
    if (t.losses.back() == 0.0) break;
    Decision d;
    try {
      d = select_action(policy, state, script, t.accumulated, cfg, mode, rng);
    } catch (const NoValidAction&) {
      break;
    }
    Step s;
    s.k = k;
    s.head = d.choice.action.head;
    s.index = d.choice.action.index;
    s.constraint = d.choice.action.constraint;
    s.applied = d.choice.result.applied;
    s.reward = d.choice.reward;
    s.value = d.value;
    s.input = std::move(d.input);
    s.masks = std::move(d.masks);
    if (s.applied) t.accumulated.push_back(s.constraint);
    state = std::move(d.choice.result.next);
    t.snapshots.push_back(state.current);
    t.losses.push_back(combined_loss(state.current, user, cfg.reward));
    t.steps.push_back(std::move(s));
  }
  return t;
}

}  // namespace storyline::agent
