#pragma once

#include "storyline/agent/checkpoint.hpp"
#include "storyline/errors.hpp"
#include "storyline/layout.hpp"
#include "storyline/render/svg.hpp"
#include "storyline/story.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

namespace storyline::service {

// Carries the HTTP status the failure maps to.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

struct Suggestion {
  Layout final_layout;
  std::vector<Layout> snapshots;
  std::vector<NarrativeConstraint> constraints;
  double loss = 0.0;  // against the session's layout when requested
  bool greedy = false;
  bool stopped = false;
  std::uint64_t seed = 0;
};

nlohmann::json suggestion_to_json(const Suggestion& s, bool with_snapshots = true);

enum class JobState { kIdle, kRunning, kDone, kStopped };
const char* to_string(JobState s);

struct SessionView {
  std::string id;
  Layout current;
  std::vector<NarrativeConstraint> constraints;
  std::size_t history_length = 0;
  bool geometric = false;  // current was edited directly, not re-derived
  bool agent_busy = false;
  std::optional<std::string> warning;
};

nlohmann::json session_view_to_json(const SessionView& v);

struct ServiceConfig {
  std::string snapshot_dir;  // empty disables snapshots
  int max_suggestions = 16;
};

// In-memory session store for the co-design loop. Mutations of one session
// are exclusive: a concurrent mutation or one issued while the agent runs is
// rejected with 409.
class AuthoringService {
 public:
  explicit AuthoringService(std::optional<agent::Checkpoint> model = std::nullopt, ServiceConfig config = {});
  ~AuthoringService();
  AuthoringService(const AuthoringService&) = delete;
  AuthoringService& operator=(const AuthoringService&) = delete;

  bool model_loaded() const { return model_.has_value(); }

  // 400 on parse or validation failure.
  SessionView create_session(const std::string& script_document, const nlohmann::json& params = nullptr);
  SessionView get(const std::string& id) const;
  // 404, 409, 422; a constraint conflict leaves the layout unchanged and sets
  // the warning.
  SessionView apply_interaction(const std::string& id, const nlohmann::json& message);
  // Runs `count` episodes (greedy first, then sampled with distinct seeds)
  // from the unconstrained layout toward the current one and returns them
  // sorted by loss. 404, 409, 422, 503.
  std::vector<Suggestion> request_suggestions(const std::string& id, int count);
  // Same work on a background thread; poll with suggestions().
  void start_suggestions(const std::string& id, int count);
  std::pair<JobState, std::vector<Suggestion>> suggestions(const std::string& id) const;
  // Stops a running job between steps. Returns whether one was running.
  bool stop_agent(const std::string& id);
  // Waits for a background job (tests and shutdown).
  void wait_idle(const std::string& id);
  SessionView adopt_suggestion(const std::string& id, int index);
  SessionView reset_session(const std::string& id);
  std::string render_svg(const std::string& id, const render::RenderOptions& options = {}) const;

  // Whether layout(script, constraints) reproduces the current geometry bit-
  // exactly; vacuously true after direct geometric edits.
  bool consistent(const std::string& id) const;
  std::vector<Layout> history(const std::string& id) const;
  nlohmann::json snapshot(const std::string& id) const;
  std::string save_snapshot(const std::string& id) const;  // returns the written path

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  std::vector<Suggestion> run_job(Session& s, int count, const Layout& target, const std::vector<StyleMark>& styles);

  std::optional<agent::Checkpoint> model_;
  ServiceConfig config_;
  mutable std::shared_mutex store_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace storyline::service
