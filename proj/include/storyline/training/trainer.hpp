#pragma once

#include "storyline/agent/checkpoint.hpp"
#include "storyline/agent/learner.hpp"
#include "storyline/training/corpus.hpp"

#include <functional>
#include <string>
#include <vector>

namespace storyline::training {

struct TrainRunConfig {
  int workers = 1;
  int episodes = 2000;
  double lr_pi = 1e-3;
  double lr_v = 1e-3;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  std::string corpus_path;
  std::string output;        // checkpoint path, empty to skip writing
  std::uint64_t seed = 0;
  int H = 100;
  std::vector<int> widths{512, 256, 128};
  agent::ActionSpace space;
  agent::EpisodeConfig episode;
  agent::UpdateOptions update;
  double adam_rate = 0.0;  // > 0: Adam on the shared parameters instead of plain steps

  void validate() const;  // throws ValidationError
};

nlohmann::json to_json(const TrainRunConfig& c);

struct EpisodeRecord {
  int episode = 0;
  int worker = 0;
  std::size_t pair = 0;  // index into the corpus pair list
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps = 0;
  double seconds = 0.0;      // episode plus update
  double wall_clock = 0.0;   // since training started
  bool skipped = false;      // non-finite gradient, update dropped
};

struct TrainLog {
  std::vector<EpisodeRecord> episodes;  // in episode-number order
  int skipped = 0;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  agent::Policy policy;
  TrainLog log;
};

// Worker threads draw pairs from the training split, run sampled episodes
// against a snapshot of the shared parameters and apply their actor-critic
// step to the shared store under a lock. A single worker with a fixed seed is
// deterministic. `initial` (optional) resumes from given parameters.
TrainResult train(const TrainRunConfig& cfg, const Corpus& corpus, const agent::Policy* initial = nullptr,
                  const std::function<void(const EpisodeRecord&)>& on_episode = {});

}  // namespace storyline::training
