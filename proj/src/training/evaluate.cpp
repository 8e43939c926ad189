#include "storyline/training/evaluate.hpp"

#include "storyline/agent/baseline.hpp"
#include "storyline/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

namespace storyline::training {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

namespace {

std::vector<double> padded(const std::vector<double>& losses, int K) {
  std::vector<double> c = losses;
  c.resize(static_cast<std::size_t>(K) + 1, losses.back());
  return c;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : pairs) {
    rows.push_back({{"script", p.script_id},
                    {"index", p.index},
                    {"initial_loss", p.initial_loss},
                    {"agent_curve", p.agent_curve},
                    {"baseline_curve", p.baseline_curve},
                    {"agent_final", p.agent_final},
                    {"baseline_final", p.baseline_final},
                    {"agent_seconds", p.agent_seconds},
                    {"baseline_seconds", p.baseline_seconds}});
  }
  return {{"pairs", rows},
          {"count", pairs.size()},
          {"agent_total", agent_total},
          {"baseline_total", baseline_total},
          {"agent_mean", agent_mean},
          {"baseline_mean", baseline_mean},
          {"agent_median", agent_median},
          {"baseline_median", baseline_median},
          {"win_rate", win_rate},
          {"tie_rate", tie_rate},
          {"agent_max_seconds", agent_max_seconds},
          {"agent_mean_seconds", agent_mean_seconds},
          {"near_identical_fraction", near_identical_fraction}};
}

EvalReport evaluate(agent::PolicyView policy, const std::vector<const TrainingPair*>& pairs,
                    const std::map<std::string, StoryScript>& scripts, const EvalOptions& o) {
  o.episode.validate();
  if (o.trials < 1 || o.baseline_candidates < 1) throw ValidationError("trials and candidates must be positive");
  EvalReport report;
  report.pairs.resize(pairs.size());
  std::vector<std::exception_ptr> errors(pairs.size());
  std::atomic<std::size_t> next{0};
  const int K = o.episode.K;

  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < pairs.size();) {
      try {
        const TrainingPair& p = *pairs[k];
        const StoryScript& script = scripts.at(p.script_id);
        PairEval& r = report.pairs[k];
        r.script_id = p.script_id;
        r.index = p.index;

        auto t0 = std::chrono::steady_clock::now();
        const auto agent_t = agent::run_episode(policy, p.origin, p.user, script, o.episode, agent::Mode::kGreedy);
        r.agent_seconds = seconds_since(t0);
        r.initial_loss = agent_t.losses.front();
        r.agent_curve = padded(agent_t.losses, K);
        r.agent_final = agent_t.final_loss();

        if (o.run_baseline) {
          r.baseline_curve.assign(static_cast<std::size_t>(K) + 1, 0.0);
          for (int trial = 0; trial < o.trials; ++trial) {
            agent::EpisodeConfig cfg = o.episode;
            cfg.seed = mix_seed(o.seed, k, static_cast<std::uint64_t>(trial));
            t0 = std::chrono::steady_clock::now();
            const auto b = agent::run_baseline_episode(p.origin, p.user, script, cfg, o.baseline_candidates,
                                                       policy.space);
            r.baseline_seconds += seconds_since(t0) / o.trials;
            const auto curve = padded(b.losses, K);
            for (std::size_t s = 0; s < curve.size(); ++s) r.baseline_curve[s] += curve[s] / o.trials;
            r.baseline_final += b.final_loss() / o.trials;
          }
        }
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(o.threads, 1, std::max(1, static_cast<int>(pairs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (pairs.empty()) return report;
  std::vector<double> agent_finals;
  std::vector<double> base_finals;
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t near = 0;
  double seconds = 0.0;
  for (const auto& r : report.pairs) {
    report.agent_total += r.agent_final;
    report.baseline_total += r.baseline_final;
    agent_finals.push_back(r.agent_final);
    base_finals.push_back(r.baseline_final);
    if (o.run_baseline && r.agent_final < r.baseline_final) ++wins;
    if (o.run_baseline && r.agent_final == r.baseline_final) ++ties;
    if (r.initial_loss < 0.05) ++near;
    seconds += r.agent_seconds;
    report.agent_max_seconds = std::max(report.agent_max_seconds, r.agent_seconds);
  }
  const auto n = static_cast<double>(pairs.size());
  report.agent_mean = report.agent_total / n;
  report.baseline_mean = report.baseline_total / n;
  report.agent_median = median(agent_finals);
  report.baseline_median = median(base_finals);
  report.win_rate = static_cast<double>(wins) / n;
  report.tie_rate = static_cast<double>(ties) / n;
  report.agent_mean_seconds = seconds / n;
  report.near_identical_fraction = static_cast<double>(near) / n;
  return report;
}

}  // namespace storyline::training
