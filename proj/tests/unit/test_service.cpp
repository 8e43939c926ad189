#include "doctest.h"
#include "../support/oracles.hpp"

#include "storyline/engine.hpp"
#include "storyline/serialize.hpp"
#include "storyline/service/http.hpp"
#include "storyline/service/service.hpp"

#include "httplib.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

using namespace storyline;
using namespace storyline::service;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ts3_doc() { return read_file(oracle::data_path("fixtures/ts3.json")); }
std::string league_doc() { return read_file(oracle::data_path("scripts/justice_league.json")); }

agent::Checkpoint small_model(int K = 4) {
  agent::Checkpoint c{agent::Policy::create(agent::ActionSpace{}, 24, {16, 8}, 5), {}, json::object()};
  c.episode.K = K;
  c.episode.seed = 11;
  return c;
}

agent::Checkpoint full_model() {
  agent::Checkpoint c{agent::Policy::create(agent::ActionSpace{}, 100, {512, 256, 128}, 5), {}, json::object()};
  c.episode.seed = 3;
  return c;
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

json shift(int c, int slot, int rank) { return {{"type", "shift"}, {"character", c}, {"slot", slot}, {"target_rank", rank}}; }

json identity_transform(const Layout& l) {
  return {{"type", "transform"},
          {"selection", {{"segments", json::array({{{"character", 0}, {"slot_begin", 0}, {"slot_end", l.num_slots() - 1}}})}}},
          {"path", json::array({{l.slot_x.front(), 0.0}, {l.slot_x.back() + 1.0, 0.0}})}};
}

// A league session whose layout is far from the origin, so agent runs take
// every step.
std::string edited_league(AuthoringService& svc) {
  const std::string id = svc.create_session(league_doc()).id;
  const Layout origin = svc.get(id).current;
  for (std::size_t j = 2; j < origin.num_slots() && j < 8; ++j) {
    int bottom = -1, count = 0;
    for (std::size_t i = 0; i < origin.num_characters(); ++i) {
      if (!origin.active(i, j)) continue;
      ++count;
      if (bottom < 0 || origin.pos(i, j) > origin.pos(bottom, j)) bottom = static_cast<int>(i);
    }
    if (count > 1) svc.apply_interaction(id, shift(bottom, static_cast<int>(j), 0));
  }
  REQUIRE_FALSE(identical(svc.get(id).current, origin));
  REQUIRE(svc.get(id).history_length > 0);
  return id;
}

}  // namespace

TEST_CASE("sessions are created with distinct ids and bad documents are rejected") {
  AuthoringService svc;
  const auto a = svc.create_session(ts3_doc());
  const auto b = svc.create_session(ts3_doc());
  CHECK(a.id != b.id);
  CHECK(a.history_length == 0);
  CHECK(identical(a.current, layout(parse_script(ts3_doc()), {})));
  CHECK(svc.consistent(a.id));
  CHECK(status_of([&] { svc.create_session("{not json"); }) == 400);
  CHECK(status_of([&] { svc.create_session(R"({"title":"x","characters":["A"],"slots":[[["B"]]]})"); }) == 400);
  CHECK(status_of([&] { svc.create_session(ts3_doc(), json{{"inner_gap", -1}}); }) == 400);
  CHECK(status_of([&] { svc.get("deadbeef"); }) == 404);
  CHECK_FALSE(svc.model_loaded());
}

TEST_CASE("interactions update the session and keep it consistent") {
  AuthoringService svc;
  const auto id = svc.create_session(ts3_doc()).id;

  auto v = svc.apply_interaction(id, shift(2, 0, 0));
  CHECK_FALSE(v.warning);
  CHECK(v.history_length == 1);
  CHECK(v.constraints.size() == 2);
  CHECK(v.current.pos(2, 0) < v.current.pos(0, 0));
  CHECK(v.current.pos(2, 0) < v.current.pos(1, 0));
  CHECK(svc.consistent(id));

  // A geometric identity edit still counts as a mutation.
  const Layout before = v.current;
  v = svc.apply_interaction(id, identity_transform(before));
  CHECK(v.history_length == 2);
  CHECK(v.geometric);
  CHECK(identical(v.current, before));
  CHECK(svc.consistent(id));

  v = svc.apply_interaction(id, {{"type", "stylish"},
                                 {"character", 1},
                                 {"slot_begin", 0},
                                 {"slot_end", 1},
                                 {"kind", "dashed"},
                                 {"payload", json::object()}});
  CHECK(v.history_length == 3);
  CHECK(v.current.styles.size() == 1);

  // C was put on top at slot 0; sending it to the bottom contradicts that.
  const auto h2 = v.history_length;
  const Layout kept2 = v.current;
  v = svc.apply_interaction(id, shift(2, 0, 2));
  REQUIRE(v.warning);
  CHECK(v.history_length == h2);
  CHECK(identical(v.current, kept2));

  CHECK(status_of([&] { svc.apply_interaction(id, {{"type", "teleport"}}); }) == 422);
  CHECK(status_of([&] { svc.apply_interaction(id, shift(7, 0, 0)); }) == 422);
  CHECK(status_of([&] { svc.apply_interaction("abc", shift(0, 0, 0)); }) == 404);
  CHECK(svc.history(id).size() == v.history_length);
}

TEST_CASE("suggestions need a model") {
  AuthoringService svc;
  const auto id = svc.create_session(ts3_doc()).id;
  CHECK(status_of([&] { svc.request_suggestions(id, 2); }) == 503);
  CHECK(status_of([&] { svc.start_suggestions(id, 2); }) == 503);
}

TEST_CASE("suggestions are sorted, adoptable and resettable") {
  AuthoringService svc(small_model());
  const auto id = svc.create_session(ts3_doc()).id;

  // Target equal to the origin: the greedy run stops at once with zero loss.
  auto list = svc.request_suggestions(id, 4);
  REQUIRE(!list.empty());
  CHECK(list.front().loss == 0.0);

  svc.apply_interaction(id, shift(2, 0, 0));
  svc.apply_interaction(id, shift(0, 1, 1));
  const auto target = svc.get(id);
  list = svc.request_suggestions(id, 4);
  REQUIRE(list.size() == 4);
  std::set<std::uint64_t> seeds;
  int greedy = 0;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (i > 0) CHECK(list[i - 1].loss <= list[i].loss);
    CHECK(list[i].loss == doctest::Approx(combined_loss(list[i].final_layout, target.current)).epsilon(1e-9));
    CHECK(identical(list[i].final_layout, list[i].snapshots.back()));
    CHECK(list[i].snapshots.size() <= 5u);
    greedy += list[i].greedy ? 1 : 0;
    seeds.insert(list[i].seed);
  }
  CHECK(greedy == 1);
  CHECK(seeds.size() == 4);
  CHECK(svc.suggestions(id).first == JobState::kDone);
  CHECK(identical(svc.get(id).current, target.current));  // requesting does not mutate

  CHECK(status_of([&] { svc.adopt_suggestion(id, 4); }) == 422);
  CHECK(status_of([&] { svc.adopt_suggestion(id, -1); }) == 422);
  CHECK(status_of([&] { svc.request_suggestions(id, 0); }) == 422);
  CHECK(status_of([&] { svc.request_suggestions(id, 17); }) == 422);

  auto v = svc.adopt_suggestion(id, 1);
  CHECK(identical(v.current, list[1].final_layout));
  CHECK(v.constraints == list[1].constraints);
  CHECK(v.history_length == target.history_length + 1);
  CHECK(svc.consistent(id));

  // Later edits build on the adopted constraints.
  const auto n = v.constraints.size();
  v = svc.apply_interaction(id, shift(1, 2, 0));
  if (!v.warning) {
    CHECK(v.constraints.size() > n);
    CHECK(std::equal(list[1].constraints.begin(), list[1].constraints.end(), v.constraints.begin()));
  }
  CHECK(svc.consistent(id));

  const auto origin = layout(parse_script(ts3_doc()), {});
  const auto h = svc.get(id).history_length;
  v = svc.reset_session(id);
  CHECK(identical(v.current, origin));
  CHECK(v.constraints.empty());
  CHECK(v.history_length == h + 1);
  v = svc.reset_session(id);
  CHECK(identical(v.current, origin));
  CHECK(v.history_length == h + 2);
  CHECK(svc.consistent(id));
}

TEST_CASE("a running agent blocks mutations and can be stopped") {
  AuthoringService svc(full_model());
  const auto id = edited_league(svc);
  const auto before = svc.get(id);

  svc.start_suggestions(id, 16);
  CHECK(svc.get(id).agent_busy);
  CHECK(status_of([&] { svc.apply_interaction(id, shift(1, 4, 0)); }) == 409);
  CHECK(status_of([&] { svc.reset_session(id); }) == 409);
  CHECK(status_of([&] { svc.request_suggestions(id, 1); }) == 409);
  CHECK(svc.suggestions(id).first == JobState::kRunning);

  CHECK(svc.stop_agent(id));
  svc.wait_idle(id);
  const auto [state, list] = svc.suggestions(id);
  CHECK(state == JobState::kStopped);
  CHECK(list.size() < 16);
  CHECK_FALSE(svc.get(id).agent_busy);
  CHECK_FALSE(svc.stop_agent(id));
  CHECK(identical(svc.get(id).current, before.current));

  // Unlocked again.
  const auto v = svc.apply_interaction(id, shift(1, 4, 0));
  CHECK(v.history_length == before.history_length + 1);
}

TEST_CASE("render and snapshot") {
  const auto dir = std::filesystem::temp_directory_path() / "storyline_snapshots_test";
  std::filesystem::remove_all(dir);
  ServiceConfig cfg;
  cfg.snapshot_dir = dir.string();
  AuthoringService svc(std::nullopt, cfg);
  const auto id = svc.create_session(ts3_doc()).id;
  svc.apply_interaction(id, shift(2, 0, 0));
  const auto svg = svc.render_svg(id);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find(">C</text>") != std::string::npos);
  const auto path = svc.save_snapshot(id);
  const auto doc = json::parse(read_file(path));
  CHECK(doc.at("id") == id);
  CHECK(doc.at("history_length") == 1);
  CHECK(identical(layout_from_json(doc.at("current")), svc.get(id).current));
  CHECK(constraints_from_json(doc.at("constraints")) == svc.get(id).constraints);
  std::filesystem::remove_all(dir);

  AuthoringService off;
  const auto id2 = off.create_session(ts3_doc()).id;
  CHECK(status_of([&] { off.save_snapshot(id2); }) == 501);
}

TEST_CASE("http round trip") {
  AuthoringService svc(small_model());
  HttpServer server(svc);
  const int port = server.bind_any("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.run(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(60, 0);
  for (int i = 0; i < 200 && !server.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body).at("model_loaded") == true);

  auto r = cli.Post("/sessions", "{broken", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);
  CHECK(json::parse(r->body).contains("error"));

  r = cli.Post("/sessions", json{{"script", json::parse(ts3_doc())}}.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 201);
  const auto created = json::parse(r->body);
  const std::string id = created.at("id");
  const std::string base = "/sessions/" + id;
  CHECK(created.at("history_length") == 0);

  r = cli.Get("/sessions/0123/layout");
  REQUIRE(r);
  CHECK(r->status == 404);

  r = cli.Post(base + "/interactions", shift(2, 0, 0).dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  auto view = json::parse(r->body);
  CHECK(view.at("history_length") == 1);
  const auto after_shift = layout_from_json(view.at("layout"));
  CHECK(after_shift.pos(2, 0) < after_shift.pos(0, 0));

  r = cli.Post(base + "/interactions", "{\"type\":\"shift\"}", "application/json");
  REQUIRE(r);
  CHECK(r->status == 422);

  r = cli.Post(base + "/suggestions", json{{"count", 3}}.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  auto body = json::parse(r->body);
  CHECK(body.at("status") == "done");
  REQUIRE(body.at("suggestions").size() == 3);
  double last = -1;
  for (const auto& s : body.at("suggestions")) {
    CHECK(s.at("loss").get<double>() >= last);
    last = s.at("loss");
  }
  const auto first = layout_from_json(body.at("suggestions")[0].at("layout"));

  r = cli.Post(base + "/suggestions", json{{"count", 99}}.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 422);
  r = cli.Post(base + "/suggestions/7/adopt", "", "application/json");
  REQUIRE(r);
  CHECK(r->status == 422);

  r = cli.Post(base + "/suggestions/0/adopt", "", "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  view = json::parse(r->body);
  CHECK(identical(layout_from_json(view.at("layout")), first));
  CHECK(svc.consistent(id));

  r = cli.Get(base + "/render.svg");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Content-Type") == "image/svg+xml");
  CHECK(r->body.find("<svg") != std::string::npos);

  r = cli.Post(base + "/suggestions", json{{"count", 2}, {"wait", false}}.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 202);
  // The job may already be done with this small model; either way polling works.
  r = cli.Post(base + "/interactions", shift(0, 1, 0).dump(), "application/json");
  REQUIRE(r);
  CHECK((r->status == 409 || r->status == 200));
  svc.wait_idle(id);
  r = cli.Get(base + "/suggestions");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(json::parse(r->body).at("status") == "done");

  r = cli.Post(base + "/agent/stop", "", "application/json");
  REQUIRE(r);
  CHECK(json::parse(r->body).at("stopped") == false);

  r = cli.Post(base + "/reset", "", "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(identical(layout_from_json(json::parse(r->body).at("layout")), layout(parse_script(ts3_doc()), {})));

  r = cli.Get("/nowhere");
  REQUIRE(r);
  CHECK(r->status == 404);

  server.stop();
  th.join();

  // No model: 503 over HTTP too.
  AuthoringService bare;
  HttpServer s2(bare);
  const int p2 = s2.bind_any("127.0.0.1");
  std::thread t2([&] { s2.run(); });
  httplib::Client c2("127.0.0.1", p2);
  for (int i = 0; i < 200 && !s2.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  auto made = c2.Post("/sessions", ts3_doc(), "application/json");
  REQUIRE(made);
  REQUIRE(made->status == 201);
  const std::string id2 = json::parse(made->body).at("id");
  auto rr = c2.Post("/sessions/" + id2 + "/suggestions", json{{"count", 1}}.dump(), "application/json");
  REQUIRE(rr);
  CHECK(rr->status == 503);
  s2.stop();
  t2.join();
}

TEST_CASE("http 409 while the agent runs") {
  AuthoringService svc(full_model());
  HttpServer server(svc);
  const int port = server.bind_any("127.0.0.1");
  std::thread th([&] { server.run(); });
  httplib::Client cli("127.0.0.1", port);
  for (int i = 0; i < 200 && !server.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  const std::string id = edited_league(svc);
  const std::string base = "/sessions/" + id;
  auto r = cli.Post(base + "/suggestions", json{{"count", 16}, {"wait", false}}.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 202);
  r = cli.Post(base + "/interactions", shift(1, 4, 0).dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 409);
  r = cli.Get(base + "/layout");
  REQUIRE(r);
  CHECK(json::parse(r->body).at("agent_busy") == true);
  r = cli.Post(base + "/agent/stop", "", "application/json");
  REQUIRE(r);
  CHECK(json::parse(r->body).at("stopped") == true);
  svc.wait_idle(id);
  r = cli.Get(base + "/suggestions");
  REQUIRE(r);
  CHECK(json::parse(r->body).at("status") == "stopped");
  server.stop();
  th.join();
}
