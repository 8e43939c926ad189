#include "storyline/training/trainer.hpp"

#include "storyline/errors.hpp"

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

namespace storyline::training {

void TrainRunConfig::validate() const {
  if (workers < 1) throw ValidationError("workers must be at least 1");
  if (episodes < 0) throw ValidationError("episodes must be non-negative");
  if (!(lr_pi > 0.0) || !(lr_v > 0.0)) throw ValidationError("learning rates must be positive");
  if (adam_rate < 0.0) throw ValidationError("adam_rate must be non-negative");
  if (checkpoint_every < 0) throw ValidationError("checkpoint_every must be non-negative");
  space.validate();
  episode.validate();
}

nlohmann::json to_json(const TrainRunConfig& c) {
  return {{"workers", c.workers},
          {"episodes", c.episodes},
          {"lr_pi", c.lr_pi},
          {"lr_v", c.lr_v},
          {"checkpoint_every", c.checkpoint_every},
          {"corpus", c.corpus_path},
          {"seed", c.seed},
          {"grid", c.H},
          {"widths", c.widths},
          {"action_space", agent::to_json(c.space)},
          {"episode", agent::to_json(c.episode)},
          {"update",
           {{"entropy", c.update.entropy},
            {"normalize_advantage", c.update.normalize_advantage},
            {"max_step_norm", c.update.max_step_norm}}},
          {"adam_rate", c.adam_rate}};
}

nlohmann::json TrainLog::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : episodes) {
    rows.push_back({{"episode", e.episode},
                    {"worker", e.worker},
                    {"pair", e.pair},
                    {"initial_loss", e.initial_loss},
                    {"final_loss", e.final_loss},
                    {"steps", e.steps},
                    {"seconds", e.seconds},
                    {"wall_clock", e.wall_clock},
                    {"skipped", e.skipped}});
  }
  return {{"episodes", rows}, {"skipped", skipped}, {"seconds", seconds}};
}

TrainResult train(const TrainRunConfig& cfg, const Corpus& corpus, const agent::Policy* initial,
                  const std::function<void(const EpisodeRecord&)>& on_episode) {
  cfg.validate();
  std::vector<std::size_t> train_pairs;
  {
    const auto split = corpus.train_split();
    for (const auto* p : split) train_pairs.push_back(static_cast<std::size_t>(p - corpus.pairs.data()));
  }
  if (train_pairs.empty()) throw ValidationError("corpus has no training pairs");

  agent::Policy base = initial ? *initial : agent::Policy::create(cfg.space, cfg.H, cfg.widths, mix_seed(cfg.seed, 0));
  if (!(base.space == cfg.space) || base.H != cfg.H) throw ShapeMismatch("initial policy does not match the run");

  // Shared store: workers take a snapshot pointer per episode; an update
  // mutates in place when nobody else holds the current parameters.
  std::mutex store_mutex;
  auto shared = std::make_shared<agent::ModelParams>(std::move(base.params));
  auto snapshot = [&] {
    std::lock_guard lock(store_mutex);
    return std::shared_ptr<const agent::ModelParams>(shared);
  };

  agent::AdamOptimizer adam;
  adam.rate = cfg.adam_rate;

  TrainLog log;
  log.episodes.resize(static_cast<std::size_t>(cfg.episodes));
  std::mutex log_mutex;
  std::atomic<int> next{0};
  std::atomic<int> completed{0};
  const auto start = std::chrono::steady_clock::now();

  auto write_checkpoint = [&](const agent::ModelParams& params, int episodes_done) {
    if (cfg.output.empty()) return;
    agent::Checkpoint ck{agent::Policy{cfg.space, cfg.H, params}, cfg.episode,
                         {{"episodes", episodes_done}, {"train", to_json(cfg)}}};
    save_checkpoint(cfg.output, ck);
  };

  auto worker = [&](int id) {
    for (int e; (e = next.fetch_add(1)) < cfg.episodes;) {
      const auto t0 = std::chrono::steady_clock::now();
      std::mt19937_64 rng(mix_seed(cfg.seed, 1, static_cast<std::uint64_t>(e)));
      const std::size_t pair_index =
          train_pairs[std::uniform_int_distribution<std::size_t>(0, train_pairs.size() - 1)(rng)];
      const TrainingPair& pair = corpus.pairs[pair_index];

      auto view = snapshot();
      const agent::PolicyView policy(cfg.space, cfg.H, *view);
      agent::EpisodeConfig ecfg = cfg.episode;
      ecfg.seed = rng();
      const auto traj = agent::run_episode(policy, pair.origin, pair.user, corpus.scripts.at(pair.script_id), ecfg,
                                           agent::Mode::kSample);
      EpisodeRecord rec;
      rec.episode = e;
      rec.worker = id;
      rec.pair = pair_index;
      rec.initial_loss = traj.losses.front();
      rec.final_loss = traj.final_loss();
      rec.steps = static_cast<int>(traj.steps.size());
      if (!traj.steps.empty()) {
        try {
          const agent::ModelParams step =
              agent::update_step(*view, agent::make_batch(traj, ecfg.reward.gamma), cfg.lr_pi, cfg.lr_v, cfg.update);
          view.reset();
          std::lock_guard lock(store_mutex);
          if (shared.use_count() > 1) shared = std::make_shared<agent::ModelParams>(*shared);
          if (cfg.adam_rate > 0.0) {
            adam.apply(*shared, step);
          } else {
            shared->axpy(1.0, step);
          }
        } catch (const NonFiniteGradient&) {
          rec.skipped = true;
        }
      }
      const auto t1 = std::chrono::steady_clock::now();
      rec.seconds = std::chrono::duration<double>(t1 - t0).count();
      rec.wall_clock = std::chrono::duration<double>(t1 - start).count();
      const int done = completed.fetch_add(1) + 1;
      {
        std::lock_guard lock(log_mutex);
        log.episodes[static_cast<std::size_t>(e)] = rec;
        if (rec.skipped) ++log.skipped;
        if (on_episode) on_episode(rec);
      }
      if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.episodes) {
        auto current = snapshot();
        write_checkpoint(*current, done);
      }
    }
  };

  std::vector<std::thread> threads;
  for (int w = 1; w < cfg.workers; ++w) threads.emplace_back(worker, w);
  worker(0);
  for (auto& t : threads) t.join();
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  TrainResult result{agent::Policy{cfg.space, cfg.H, std::move(*shared)}, std::move(log)};
  write_checkpoint(result.policy.params, cfg.episodes);
  return result;
}

}  // namespace storyline::training
