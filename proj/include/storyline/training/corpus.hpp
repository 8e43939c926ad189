#pragma once

#include "storyline/agent/action_space.hpp"
#include "storyline/layout.hpp"
#include "storyline/story.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace storyline::training {

// Deterministic stream splitting for seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

struct ConstraintPools {
  std::vector<NarrativeConstraint> ordering;
  std::vector<NarrativeConstraint> alignment;
  std::vector<NarrativeConstraint> compaction;

  std::size_t size() const { return ordering.size() + alignment.size() + compaction.size(); }
};

// Up to `per_group` distinct constraints per kind, each individually feasible
// for the script. Compaction pairs are rank neighbors in the unconstrained
// layout with bounds from the action menu.
ConstraintPools generate_constraint_pool(const StoryScript& script, std::size_t per_group, std::uint64_t seed,
                                         const LayoutParams& params = {}, const agent::ActionSpace& space = {});

struct TrainingPair {
  std::string script_id;
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Layout origin;
  Layout user;
  std::vector<NarrativeConstraint> ground_truth;
};

nlohmann::json pair_to_json(const TrainingPair& p);
TrainingPair pair_from_json(const nlohmann::json& doc);

// K distinct constraints drawn evenly over the three kinds, each draw kept
// only if it stays jointly feasible with the earlier ones; the user layout is
// rendered from them. Throws ExhaustedRetries.
TrainingPair sample_user_layout(const StoryScript& script, int K, std::uint64_t seed, const LayoutParams& params = {},
                                const agent::ActionSpace& space = {});

struct NamedScript {
  std::string id;
  StoryScript script;
};

// Every *.json script in the directory, sorted by file name; id = file stem.
std::vector<NamedScript> load_scripts_dir(const std::string& dir);

struct CorpusOptions {
  std::size_t per_script = 50;
  int K = 15;
  std::uint64_t seed = 0;
  int threads = 1;
  LayoutParams params;
};

// Writes manifest.json, scripts.json and pairs.ndjson into `out_dir` and
// returns the manifest. Failures are rethrown with the script id.
nlohmann::json build_corpus(const std::vector<NamedScript>& scripts, const CorpusOptions& options,
                            const std::string& out_dir);

struct Corpus {
  nlohmann::json manifest;
  std::map<std::string, StoryScript> scripts;
  std::vector<TrainingPair> pairs;  // grouped by script, in index order

  // Pairs with index below 80% of their script's count, and the rest.
  std::vector<const TrainingPair*> train_split() const;
  std::vector<const TrainingPair*> held_out() const;
};

// Verifies file checksums against the manifest. Throws SyntaxError.
Corpus load_corpus(const std::string& dir);

std::string sha256_hex(const std::string& bytes);

}  // namespace storyline::training
