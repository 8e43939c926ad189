#pragma once

#include "storyline/agent/policy.hpp"
#include "storyline/training/corpus.hpp"

#include <vector>

namespace storyline::training {

struct EvalOptions {
  int baseline_candidates = 16;
  int trials = 1;  // baseline runs per pair, averaged
  std::uint64_t seed = 0;
  int threads = 1;
  agent::EpisodeConfig episode;
  bool run_baseline = true;
};

struct PairEval {
  std::string script_id;
  std::size_t index = 0;
  double initial_loss = 0.0;
  std::vector<double> agent_curve;     // K + 1 losses, held after an early stop
  std::vector<double> baseline_curve;  // mean over trials
  double agent_final = 0.0;
  double baseline_final = 0.0;
  double agent_seconds = 0.0;
  double baseline_seconds = 0.0;  // mean over trials
};

struct EvalReport {
  std::vector<PairEval> pairs;
  double agent_total = 0.0;
  double baseline_total = 0.0;
  double agent_mean = 0.0;
  double baseline_mean = 0.0;
  double agent_median = 0.0;
  double baseline_median = 0.0;
  double win_rate = 0.0;  // agent strictly below baseline
  double tie_rate = 0.0;
  double agent_max_seconds = 0.0;
  double agent_mean_seconds = 0.0;
  double near_identical_fraction = 0.0;  // pairs starting below 0.05 loss

  nlohmann::json to_json() const;
};

double median(std::vector<double> values);

// Greedy-mode agent episode and baseline episodes on every pair.
EvalReport evaluate(agent::PolicyView policy, const std::vector<const TrainingPair*>& pairs,
                    const std::map<std::string, StoryScript>& scripts, const EvalOptions& options = {});

}  // namespace storyline::training
