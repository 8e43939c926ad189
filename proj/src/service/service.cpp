#include "storyline/service/service.hpp"

#include "storyline/engine.hpp"
#include "storyline/errors.hpp"
#include "storyline/interaction.hpp"
#include "storyline/serialize.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace storyline::service {

struct AuthoringService::Session {
  std::string id;
  StoryScript script;
  Layout origin;
  Layout current;
  std::vector<NarrativeConstraint> constraints;
  std::vector<Layout> history;
  bool geometric = false;

  std::mutex mutex;  // guards everything above plus job/suggestions
  std::atomic<bool> busy{false};
  std::atomic<bool> stop{false};
  JobState job = JobState::kIdle;
  std::vector<Suggestion> suggestions;
  std::optional<std::string> job_error;
  std::thread worker;
};

const char* to_string(JobState s) {
  switch (s) {
    case JobState::kIdle: return "idle";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kStopped: return "stopped";
  }
  return "unknown";
}

nlohmann::json suggestion_to_json(const Suggestion& s, bool with_snapshots) {
  nlohmann::json doc = {{"loss", s.loss},
                        {"greedy", s.greedy},
                        {"stopped", s.stopped},
                        {"seed", s.seed},
                        {"steps", s.snapshots.empty() ? 0 : s.snapshots.size() - 1},
                        {"constraints", constraints_to_json(s.constraints)},
                        {"layout", layout_to_json(s.final_layout)}};
  if (with_snapshots) {
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& l : s.snapshots) snaps.push_back(layout_to_json(l));
    doc["snapshots"] = std::move(snaps);
  }
  return doc;
}

nlohmann::json session_view_to_json(const SessionView& v) {
  nlohmann::json doc = {{"id", v.id},
                        {"layout", layout_to_json(v.current)},
                        {"constraints", constraints_to_json(v.constraints)},
                        {"history_length", v.history_length},
                        {"geometric", v.geometric},
                        {"agent_busy", v.agent_busy}};
  if (v.warning) doc["warning"] = *v.warning;
  return doc;
}

namespace {

std::string new_token() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  std::ostringstream s;
  s << std::hex << rng() << rng();
  return s.str();
}

// Same geometry and bookkeeping; style marks are carried separately.
bool same_geometry(Layout a, const Layout& b) {
  a.styles = b.styles;
  return identical(a, b);
}

}  // namespace

AuthoringService::AuthoringService(std::optional<agent::Checkpoint> model, ServiceConfig config)
    : model_(std::move(model)), config_(std::move(config)) {}

AuthoringService::~AuthoringService() {
  std::unique_lock lock(store_mutex_);
  for (auto& [id, s] : sessions_) {
    s->stop = true;
    if (s->worker.joinable()) s->worker.join();
  }
}

std::shared_ptr<AuthoringService::Session> AuthoringService::find(const std::string& id) const {
  std::shared_lock lock(store_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
  return it->second;
}

namespace {

SessionView view_of(const std::string& id, const Layout& current, const std::vector<NarrativeConstraint>& cs,
                    std::size_t history, bool geometric, bool busy) {
  return SessionView{id, current, cs, history, geometric, busy, std::nullopt};
}

// Exclusive access for a mutation, or 409.
template <typename S>
std::unique_lock<std::mutex> lock_for_mutation(S& s) {
  std::unique_lock lock(s.mutex, std::try_to_lock);
  if (!lock.owns_lock()) throw ServiceError(409, "session is being modified by another request");
  if (s.busy) throw ServiceError(409, "the agent is running on this session");
  return lock;
}

}  // namespace

SessionView AuthoringService::create_session(const std::string& document, const nlohmann::json& params_doc) {
  auto s = std::make_shared<Session>();
  try {
    s->script = parse_script(document);
    const LayoutParams params = params_doc.is_null() ? LayoutParams{} : params_from_json(params_doc);
    s->origin = layout(s->script, {}, params);
  } catch (const Error& e) {
    throw ServiceError(400, e.what());
  }
  s->current = s->origin;
  s->id = new_token();
  SessionView v = view_of(s->id, s->current, {}, 0, false, false);
  std::unique_lock lock(store_mutex_);
  sessions_.emplace(s->id, std::move(s));
  return v;
}

SessionView AuthoringService::get(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return view_of(id, s->current, s->constraints, s->history.size(), s->geometric, s->busy);
}

SessionView AuthoringService::apply_interaction(const std::string& id, const nlohmann::json& message) {
  auto s = find(id);
  auto lock = lock_for_mutation(*s);
  InteractionMessage msg;
  InteractionResult result;
  try {
    msg = parse_interaction(message);
    result = storyline::apply_interaction(s->current, msg);
  } catch (const Error& e) {
    throw ServiceError(422, e.what());
  }
  SessionView v;
  if (result.edited) {
    s->history.push_back(s->current);
    const bool moves = std::holds_alternative<TransformMessage>(msg) || std::holds_alternative<PullMessage>(msg);
    s->current = std::move(*result.edited);
    s->geometric = s->geometric || moves;
  } else {
    auto next = s->constraints;
    next.insert(next.end(), result.constraints.begin(), result.constraints.end());
    try {
      Layout l = layout(s->script, next, s->origin.params);
      l.styles = s->current.styles;
      s->history.push_back(s->current);
      s->current = std::move(l);
      s->constraints = std::move(next);
      s->geometric = false;
    } catch (const ConstraintConflict& e) {
      v.warning = e.what();
    } catch (const InfeasibleConstraints& e) {
      std::string w = e.what();
      for (const auto& c : e.conflicting()) w += "; " + c;
      v.warning = w;
    }
  }
  const auto warning = v.warning;
  v = view_of(id, s->current, s->constraints, s->history.size(), s->geometric, false);
  v.warning = warning;
  return v;
}

std::vector<Suggestion> AuthoringService::run_job(Session& s, int count, const Layout& target,
                                                  const std::vector<StyleMark>& styles) {
  std::vector<Suggestion> out;
  const agent::Checkpoint& m = *model_;
  for (int e = 0; e < count && !s.stop; ++e) {
    agent::EpisodeConfig cfg = m.episode;
    cfg.seed = 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(e + 1) + m.episode.seed;
    const auto mode = e == 0 ? agent::Mode::kGreedy : agent::Mode::kSample;
    agent::Trajectory t = agent::run_episode(m.policy, s.origin, target, s.script, cfg, mode, &s.stop);
    Suggestion sg;
    sg.snapshots = std::move(t.snapshots);
    for (auto& l : sg.snapshots) l.styles = styles;
    sg.final_layout = sg.snapshots.back();
    sg.constraints = std::move(t.accumulated);
    sg.loss = t.losses.back();
    sg.greedy = e == 0;
    sg.stopped = t.stopped;
    sg.seed = cfg.seed;
    out.push_back(std::move(sg));
    if (t.stopped) break;
  }
  std::stable_sort(out.begin(), out.end(), [](const Suggestion& a, const Suggestion& b) { return a.loss < b.loss; });
  return out;
}

namespace {

void check_count(int count, int max) {
  if (count < 1 || count > max) {
    throw ServiceError(422, "suggestion count must be between 1 and " + std::to_string(max));
  }
}

}  // namespace

std::vector<Suggestion> AuthoringService::request_suggestions(const std::string& id, int count) {
  if (!model_) throw ServiceError(503, "no model loaded");
  check_count(count, config_.max_suggestions);
  auto s = find(id);
  Layout target;
  {
    auto lock = lock_for_mutation(*s);
    if (s->worker.joinable()) s->worker.join();
    s->busy = true;
    s->stop = false;
    s->job = JobState::kRunning;
    target = s->current;
  }
  std::vector<Suggestion> out;
  try {
    out = run_job(*s, count, target, target.styles);
  } catch (...) {
    std::lock_guard lock(s->mutex);
    s->job = JobState::kIdle;
    s->busy = false;
    throw;
  }
  std::lock_guard lock(s->mutex);
  s->job = s->stop ? JobState::kStopped : JobState::kDone;
  s->suggestions = out;
  s->stop = false;
  s->busy = false;
  return out;
}

void AuthoringService::start_suggestions(const std::string& id, int count) {
  if (!model_) throw ServiceError(503, "no model loaded");
  check_count(count, config_.max_suggestions);
  auto s = find(id);
  auto lock = lock_for_mutation(*s);
  if (s->worker.joinable()) s->worker.join();
  s->busy = true;
  s->stop = false;
  s->job = JobState::kRunning;
  s->suggestions.clear();
  s->job_error.reset();
  Layout target = s->current;
  Session* raw = s.get();
  s->worker = std::thread([this, raw, count, target = std::move(target)] {
    std::vector<Suggestion> out;
    std::optional<std::string> error;
    try {
      out = run_job(*raw, count, target, target.styles);
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard guard(raw->mutex);
    raw->job = raw->stop ? JobState::kStopped : JobState::kDone;
    raw->suggestions = std::move(out);
    raw->job_error = error;
    raw->stop = false;
    raw->busy = false;
  });
}

std::pair<JobState, std::vector<Suggestion>> AuthoringService::suggestions(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (s->job_error) throw ServiceError(500, "agent failed: " + *s->job_error);
  return {s->job, s->suggestions};
}

bool AuthoringService::stop_agent(const std::string& id) {
  auto s = find(id);
  if (!s->busy) return false;
  s->stop = true;
  return true;
}

void AuthoringService::wait_idle(const std::string& id) {
  auto s = find(id);
  std::thread t;
  {
    std::lock_guard lock(s->mutex);
    t = std::move(s->worker);
  }
  if (t.joinable()) t.join();
}

SessionView AuthoringService::adopt_suggestion(const std::string& id, int index) {
  auto s = find(id);
  auto lock = lock_for_mutation(*s);
  if (index < 0 || static_cast<std::size_t>(index) >= s->suggestions.size()) {
    throw ServiceError(422, "no suggestion with index " + std::to_string(index));
  }
  const Suggestion& sg = s->suggestions[static_cast<std::size_t>(index)];
  s->history.push_back(s->current);
  s->current = sg.final_layout;
  s->constraints = sg.constraints;
  s->geometric = false;
  return view_of(id, s->current, s->constraints, s->history.size(), s->geometric, false);
}

SessionView AuthoringService::reset_session(const std::string& id) {
  auto s = find(id);
  auto lock = lock_for_mutation(*s);
  s->history.push_back(s->current);
  s->current = s->origin;
  s->constraints.clear();
  s->geometric = false;
  return view_of(id, s->current, s->constraints, s->history.size(), s->geometric, false);
}

std::string AuthoringService::render_svg(const std::string& id, const render::RenderOptions& options) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  render::RenderOptions o = options;
  if (o.labels.empty()) {
    for (const auto& c : s->script.characters) o.labels.push_back(c.name);
  }
  return render::to_svg(s->current, o);
}

bool AuthoringService::consistent(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (s->geometric) return true;
  return same_geometry(layout(s->script, s->constraints, s->origin.params), s->current);
}

std::vector<Layout> AuthoringService::history(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->history;
}

nlohmann::json AuthoringService::snapshot(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  nlohmann::json sugg = nlohmann::json::array();
  for (const auto& sg : s->suggestions) sugg.push_back(suggestion_to_json(sg, false));
  return {{"id", s->id},
          {"script", nlohmann::json::parse(serialize_script(s->script))},
          {"params", params_to_json(s->origin.params)},
          {"constraints", constraints_to_json(s->constraints)},
          {"current", layout_to_json(s->current)},
          {"history_length", s->history.size()},
          {"geometric", s->geometric},
          {"suggestions", sugg}};
}

std::string AuthoringService::save_snapshot(const std::string& id) const {
  if (config_.snapshot_dir.empty()) throw ServiceError(501, "snapshots are disabled");
  const nlohmann::json doc = snapshot(id);
  std::filesystem::create_directories(config_.snapshot_dir);
  const auto path = (std::filesystem::path(config_.snapshot_dir) / (id + ".json")).string();
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2) << "\n";
  if (!out) throw ServiceError(500, "cannot write " + path);
  return path;
}

}  // namespace storyline::service
