#pragma once

#include "storyline/agent/policy.hpp"

#include <array>
#include <vector>

namespace storyline::agent {

struct UpdateOptions {
  double entropy = 0.0;              // weight of the selected head's entropy bonus
  bool normalize_advantage = false;  // scale advantages to unit spread per batch
  double max_step_norm = 0.0;        // clip the parameter step (0 disables)
};

// Column k is one visited state with the head and index that were taken.
struct UpdateBatch {
  Eigen::MatrixXd inputs;
  std::vector<std::array<std::vector<char>, 3>> masks;
  std::vector<Head> heads;
  std::vector<int> indices;
  std::vector<double> returns;

  std::size_t size() const { return heads.size(); }
};

UpdateBatch make_batch(const Trajectory& trajectory, double gamma);

// sum_k A_k log pi(a_k | s_k) + beta * sum_k entropy_k, advantages held fixed.
double policy_objective(const ModelParams& p, const UpdateBatch& batch, const std::vector<double>& advantages,
                        double entropy = 0.0);
ModelParams policy_gradient(const ModelParams& p, const UpdateBatch& batch, const std::vector<double>& advantages,
                            double entropy = 0.0);

// sum_k (R_k - V(s_k))^2
double value_loss(const ModelParams& p, const UpdateBatch& batch);
ModelParams value_gradient(const ModelParams& p, const UpdateBatch& batch);

// R_k - V(s_k) under the given parameters (optionally normalized).
std::vector<double> advantages(const ModelParams& p, const UpdateBatch& batch, bool normalize = false);

// Parameter step lr_pi * grad(policy objective) - lr_v * grad(value loss),
// computed in one backward pass. Throws NonFiniteGradient.
ModelParams update_step(const ModelParams& p, const UpdateBatch& batch, double lr_pi, double lr_v,
                        const UpdateOptions& options = {});

// Adam on an ascent direction (typically an update_step result): the
// learning rates inside the direction only weigh the policy and value terms
// against each other, `rate` sets the step length.
struct AdamOptimizer {
  double rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  ModelParams m;
  ModelParams v;
  long steps = 0;

  void apply(ModelParams& params, const ModelParams& direction);
};

// Returns the updated parameters; on NonFiniteGradient `p` is untouched and
// the exception propagates.
ModelParams actor_critic_update(const ModelParams& p, const Trajectory& trajectory, const EpisodeConfig& cfg,
                                double lr_pi, double lr_v, const UpdateOptions& options = {});

}  // namespace storyline::agent
