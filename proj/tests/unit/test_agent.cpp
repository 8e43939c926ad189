#include "doctest.h"
#include "../support/nets.hpp"
#include "../support/oracles.hpp"

#include "storyline/agent/baseline.hpp"
#include "storyline/agent/checkpoint.hpp"
#include "storyline/agent/learner.hpp"
#include "storyline/engine.hpp"
#include "storyline/errors.hpp"
#include "storyline/interaction.hpp"
#include "storyline/serialize.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <fstream>

using namespace storyline;
using namespace storyline::agent;

namespace {

StoryScript ts3() { return load_script_file(oracle::data_path("fixtures/ts3.json")); }

// Cells a segment passes through with positive length (open squares), plus
// the cells holding its two endpoints. Horizontal segments own the row their
// y rounds to.
std::set<std::pair<int, int>> segment_cells(double x0, double y0, double x1, double y1) {
  auto cell = [](double v) { return static_cast<int>(std::floor(v + 0.5)); };
  std::set<std::pair<int, int>> out{{cell(x0), cell(y0)}, {cell(x1), cell(y1)}};
  if (y0 == y1) {
    for (int c = std::min(cell(x0), cell(x1)); c <= std::max(cell(x0), cell(x1)); ++c) out.insert({c, cell(y0)});
    return out;
  }
  const int cx0 = std::min(cell(x0), cell(x1)) - 1, cx1 = std::max(cell(x0), cell(x1)) + 1;
  const int cy0 = std::min(cell(y0), cell(y1)) - 1, cy1 = std::max(cell(y0), cell(y1)) + 1;
  for (int cx = cx0; cx <= cx1; ++cx) {
    for (int cy = cy0; cy <= cy1; ++cy) {
      double lo = 0.0, hi = 1.0;
      const double d[2] = {x1 - x0, y1 - y0};
      const double p0[2] = {x0, y0};
      const double c[2] = {static_cast<double>(cx), static_cast<double>(cy)};
      bool empty = false;
      for (int a = 0; a < 2 && !empty; ++a) {
        if (d[a] == 0.0) {
          if (!(p0[a] > c[a] - 0.5 && p0[a] < c[a] + 0.5)) empty = true;
          continue;
        }
        double t0 = (c[a] - 0.5 - p0[a]) / d[a], t1 = (c[a] + 0.5 - p0[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
      }
      if (!empty && hi - lo > 1e-9) out.insert({cx, cy});
    }
  }
  return out;
}

std::set<std::pair<int, int>> reference_cells(const Layout& l, int H) {
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < l.num_characters(); ++i) {
    for (std::size_t j = 0; j < l.num_slots(); ++j) {
      if (!l.active(i, j)) continue;
      lo = std::min(lo, l.pos(i, j));
      hi = std::max(hi, l.pos(i, j));
    }
  }
  const double span = H - 1.0;
  auto row = [&](std::size_t i, std::size_t j) { return hi > lo ? (l.pos(i, j) - lo) / (hi - lo) * span : 0.0; };
  auto col = [&](std::size_t j) {
    return l.num_slots() > 1 ? static_cast<double>(j) / static_cast<double>(l.num_slots() - 1) * span : 0.0;
  };
  std::set<std::pair<int, int>> cells;
  for (std::size_t i = 0; i < l.num_characters(); ++i) {
    for (std::size_t j = 0; j < l.num_slots(); ++j) {
      if (!l.active(i, j)) continue;
      if (j + 1 < l.num_slots() && l.active(i, j + 1)) {
        const auto seg = segment_cells(col(j), row(i, j), col(j + 1), row(i, j + 1));
        cells.insert(seg.begin(), seg.end());
      } else {
        cells.insert({static_cast<int>(std::floor(col(j) + 0.5)), static_cast<int>(std::floor(row(i, j) + 0.5))});
      }
    }
  }
  return cells;
}

std::size_t reference_count(const Layout& l, int H) { return reference_cells(l, H).size(); }

std::size_t nonzeros(const Eigen::MatrixXd& g) { return static_cast<std::size_t>((g.array() != 0.0).count()); }

Layout shifted_user(const StoryScript& s, const Layout& origin) {
  const auto cs = shift(origin, find_character(s, "C"), 0, 0);
  return layout(s, {cs.begin(), cs.end()});
}

}  // namespace

TEST_CASE("flat single line fills one grid row") {
  const auto s = parse_script(R"({"title":"one","characters":["A"],"slots":[[["A"]],[["A"]],[["A"]],[["A"]]]})");
  const auto l = layout(s, {});
  const int H = 100;
  const auto g = rasterize(l, H);
  int full = 0;
  for (int r = 0; r < H; ++r) {
    if (g.row(r).sum() == H) ++full;
  }
  CHECK(full == 1);
  CHECK(nonzeros(g) == static_cast<std::size_t>(H));
  CHECK(g.maxCoeff() == 1.0);
  CHECK(g.minCoeff() == 0.0);
}

TEST_CASE("rasterizer agrees with exact segment clipping") {
  const auto s = ts3();
  const auto l = layout(s, {});
  for (int H : {100, 37, 8}) CHECK(nonzeros(rasterize(l, H)) == reference_count(l, H));
  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    const auto rs = oracle::random_script(rng, 7, 9, 0.8, 2, 2);
    const auto rl = layout(rs, {});
    CHECK(nonzeros(rasterize(rl, 100)) == reference_count(rl, 100));
  }
}

TEST_CASE("state encoding channels and step feature") {
  const auto s = ts3();
  const auto l = layout(s, {});
  const auto g = encode_state({l, l, 3}, 100, 15);
  CHECK(g.current == g.target);
  CHECK(g.step_fraction == doctest::Approx(0.2));
  const auto v = g.flatten();
  CHECK(v.size() == encoded_size(100));
  CHECK(v.maxCoeff() <= 1.0);
  CHECK(v.minCoeff() >= 0.0);
  Layout empty = l;
  empty.pos = PositionMatrix(l.num_characters(), l.num_slots(), kAbsentPosition);
  empty.order = OrderMatrix(l.num_characters(), l.num_slots(), kAbsent);
  CHECK_THROWS_AS(rasterize(empty, 100), DegenerateLayout);
}

TEST_CASE("zero heads give uniform distributions and zero value") {
  const auto policy = Policy::create(ActionSpace{}, 100, {512, 256, 128}, 3);
  const auto s = ts3();
  const auto l = layout(s, {});
  const auto in = encode_state({l, shifted_user(s, l), 0}, 100, 15).flatten();
  const auto out = policy_forward(policy.params, in);
  for (const auto& p : out.probs) {
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.maxCoeff() == doctest::Approx(p.minCoeff()));
  }
  CHECK(out.value == 0.0);
  CHECK(value_forward(policy.params, in) == 0.0);
}

TEST_CASE("forward pass is deterministic and normalized") {
  auto p = ModelParams::initialize(nets::small_config(), 4);
  nets::randomize(p, 5, 0.8);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd x(7);
    for (auto& v : x) v = u(rng);
    const auto a = policy_forward(p, x);
    const auto b = policy_forward(p, x);
    for (int h = 0; h < 3; ++h) {
      CHECK(std::abs(a.probs[static_cast<std::size_t>(h)].sum() - 1.0) < 1e-6);
      CHECK((a.probs[static_cast<std::size_t>(h)].array() == b.probs[static_cast<std::size_t>(h)].array()).all());
    }
    CHECK(a.value == b.value);
  }
  Eigen::VectorXd wrong(5);
  wrong.setZero();
  CHECK_THROWS_AS(policy_forward(p, wrong), ShapeMismatch);
}

TEST_CASE("masked softmax") {
  Eigen::VectorXd z(4);
  z << 1.0, 2.0, 3.0, 4.0;
  const auto p = masked_softmax(z, {1, 0, 1, 0});
  CHECK(p(1) == 0.0);
  CHECK(p(3) == 0.0);
  CHECK(p(0) + p(2) == doctest::Approx(1.0));
  CHECK(p(2) / p(0) == doctest::Approx(std::exp(2.0)));
  CHECK(masked_softmax(z, {}).sum() == doctest::Approx(1.0));
  CHECK(masked_softmax(z, {0, 0, 0, 0}).sum() == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto p = ModelParams::initialize(nets::small_config(), seed);
    nets::randomize(p, seed + 100, 0.7);
    const auto batch = nets::random_batch(p.config, 6, seed + 200);
    const auto adv = advantages(p, batch);
    for (double beta : {0.0, 0.3}) {
      const auto g = policy_gradient(p, batch, adv, beta);
      CHECK(nets::gradient_error(p, g, [&](const ModelParams& q) { return policy_objective(q, batch, adv, beta); }) < 1e-4);
    }
    const auto gv = value_gradient(p, batch);
    CHECK(nets::gradient_error(p, gv, [&](const ModelParams& q) { return value_loss(q, batch); }) < 1e-4);

    // combined step equals the two gradients weighed separately
    const auto step = update_step(p, batch, 0.3, 0.2);
    auto expect = ModelParams::zeros_like(p);
    expect.axpy(0.3, policy_gradient(p, batch, adv));
    expect.axpy(-0.2, gv);
    const auto fa = step.flatten(), fb = expect.flatten();
    for (std::size_t k = 0; k < fa.size(); ++k) CHECK(fa[k] == doctest::Approx(fb[k]).epsilon(1e-9));
  }
}

TEST_CASE("zero advantage leaves the policy unchanged") {
  auto p = ModelParams::initialize(nets::small_config(), 8);
  nets::randomize(p, 9, 0.5);
  auto batch = nets::random_batch(p.config, 5, 10);
  for (std::size_t k = 0; k < batch.size(); ++k) batch.returns[k] = value_forward(p, batch.inputs.col(static_cast<Eigen::Index>(k)));
  auto next = p;
  next.axpy(1.0, update_step(p, batch, 0.5, 0.0));
  CHECK(next.flatten() == p.flatten());
}

TEST_CASE("value head learns a constant return") {
  auto p = ModelParams::initialize(nets::small_config(), 12);
  UpdateBatch b;
  b.inputs = Eigen::MatrixXd::Constant(7, 1, 0.5);
  b.masks = {{}};
  b.heads = {Head::kShift};
  b.indices = {0};
  b.returns = {discounted_return({1.0}, 0.0)[0]};
  for (int it = 0; it < 300; ++it) p.axpy(1.0, update_step(p, b, 0.0, 0.05));
  CHECK(std::abs(value_forward(p, b.inputs.col(0)) - 1.0) < 0.05);
}

TEST_CASE("policy gradient solves a bandit") {
  auto p = ModelParams::initialize(nets::small_config(), 13);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(7, 0.3);
  std::mt19937_64 rng(14);
  const int best = 2;
  int updates = 0;
  for (; updates < 500; ++updates) {
    const auto out = policy_forward(p, x);
    if (out.probs[0](best) > 0.9) break;
    std::discrete_distribution<int> pick(out.probs[0].data(), out.probs[0].data() + out.probs[0].size());
    const int a = pick(rng);
    UpdateBatch b;
    b.inputs = x;
    b.masks = {{}};
    b.heads = {Head::kShift};
    b.indices = {a};
    b.returns = {a == best ? 1.0 : 0.0};
    p.axpy(1.0, update_step(p, b, 0.5, 0.05));
  }
  CHECK(updates < 500);
  CHECK(policy_forward(p, x).probs[0](best) > 0.9);
}

TEST_CASE("non-finite gradients are rejected") {
  auto p = ModelParams::initialize(nets::small_config(), 15);
  auto batch = nets::random_batch(p.config, 3, 16);
  batch.returns[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(update_step(p, batch, 0.1, 0.1), NonFiniteGradient);
}

TEST_CASE("greedy selection picks the best simulated head") {
  const auto s = ts3();
  const auto origin = layout(s, {});
  const auto user = shifted_user(s, origin);
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto policy = Policy::create(ActionSpace{}, 24, {16, 8}, seed);
    for (auto& h : policy.params.heads) {
      std::mt19937_64 rng(seed * 7);
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      for (Eigen::Index k = 0; k < h.W.size(); ++k) h.W.data()[k] = u(rng);
    }
    EpisodeConfig cfg;
    std::mt19937_64 rng(seed);
    const AgentState st{origin, user, 0};
    const auto d = select_action(policy, st, s, {}, cfg, Mode::kGreedy, rng);

    const auto out = policy_forward(policy.params, encode_state(st, 24, cfg.K).flatten(), d.masks);
    const double start = combined_loss(origin, user);
    double best = -1e300;
    int best_head = -1;
    for (int h = 0; h < 3; ++h) {
      const auto& pr = out.probs[static_cast<std::size_t>(h)];
      const auto& mk = d.masks[static_cast<std::size_t>(h)];
      int top = -1;
      for (int k = 0; k < pr.size(); ++k) {
        if (mk[static_cast<std::size_t>(k)] && (top < 0 || pr(k) > pr(top))) top = k;
      }
      if (top < 0) continue;
      const auto c = decode(policy.space, origin, static_cast<Head>(h), top);
      REQUIRE(c.has_value());
      std::vector<NarrativeConstraint> acc;
      const auto t = transition(st, *c, s, acc, origin.params);
      const double r = step_reward(start, combined_loss(t.next.current, user));
      if (r > best) {
        best = r;
        best_head = h;
      }
    }
    CHECK(static_cast<int>(d.choice.action.head) == best_head);
    CHECK(d.choice.reward == doctest::Approx(best));
  }
}

TEST_CASE("selection still answers when current equals target") {
  const auto s = ts3();
  const auto origin = layout(s, {});
  const auto policy = Policy::create(ActionSpace{}, 24, {16, 8}, 2);
  std::mt19937_64 rng(1);
  const auto d = select_action(policy, {origin, origin, 0}, s, {}, EpisodeConfig{}, Mode::kGreedy, rng);
  CHECK(d.choice.reward <= 0.0);
  const auto sampled = select_action(policy, {origin, origin, 0}, s, {}, EpisodeConfig{}, Mode::kSample, rng);
  CHECK(sampled.choice.reward <= 0.0);
}

TEST_CASE("conflicting transition is a no-op") {
  const auto s = ts3();
  const auto origin = layout(s, {});
  std::vector<NarrativeConstraint> acc{AlignmentConstraint{0, 1, 1}};
  const auto base = layout(s, acc);
  const auto t = transition({base, origin, 2}, AlignmentConstraint{0, 1, 0}, s, acc, origin.params);
  CHECK_FALSE(t.applied);
  CHECK(identical(t.next.current, base));
  CHECK(t.next.k == 3);
  CHECK(acc.size() == 1);
  const auto ok = transition({base, origin, 2}, OrderingConstraint{0, 2, 0}, s, acc, origin.params);
  CHECK(ok.applied);
  CHECK(acc.size() == 2);
}

TEST_CASE("every decoded action is valid for the script") {
  const auto s = load_script_file(oracle::data_path("scripts/justice_league.json"));
  const auto l = layout(s, {});
  const ActionSpace space;
  for (Head h : kHeads) {
    std::vector<std::optional<NarrativeConstraint>> dec;
    const auto mask = valid_mask(space, l, h, {}, &dec);
    CHECK(static_cast<int>(mask.size()) == space.head_size(h));
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (!mask[k]) continue;
      REQUIRE(dec[k].has_value());
      const bool ordering = std::holds_alternative<OrderingConstraint>(*dec[k]);
      const bool alignment = std::holds_alternative<AlignmentConstraint>(*dec[k]);
      CHECK(ordering == (h == Head::kShift));
      CHECK(alignment == (h == Head::kBend));
      try {
        const auto next = layout(s, {*dec[k]});
        CHECK(check_layout(s, next, {*dec[k]}).empty());
      } catch (const ConstraintConflict&) {
      } catch (const InfeasibleConstraints&) {
      }
    }
  }
}

TEST_CASE("baseline recovers a one-action edit") {
  const auto s = ts3();
  const auto origin = layout(s, {});
  const ActionSpace space;
  std::vector<std::optional<NarrativeConstraint>> dec;
  const auto mask = valid_mask(space, origin, Head::kShift, {}, &dec);
  int solved = 0, total = 0;
  for (std::size_t k = 0; k < mask.size() && total < 100; ++k) {
    if (!mask[k]) continue;
    const auto user = layout(s, {*dec[k]});
    if (combined_loss(origin, user) == 0.0) continue;
    for (std::uint64_t seed = 0; seed < 100 && total < 100; seed += 7) {
      std::vector<NarrativeConstraint> acc;
      const auto step = greedy_baseline_step({origin, user, 0}, s, acc, origin.params, 64, seed, space);
      ++total;
      if (combined_loss(step.next.current, user) == 0.0) ++solved;
    }
  }
  REQUIRE(total == 100);
  CHECK(solved >= 95);
}

TEST_CASE("baseline loss never increases") {
  const auto s = load_script_file(oracle::data_path("scripts/justice_league.json"));
  const auto origin = layout(s, {});
  Layout user = origin;
  Selection sel;
  sel.segments = {{5, 5, 6}, {6, 0, 9}};
  user = transform(origin, sel, StrokePath{{{0, 0}, {900, 120}}});
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    EpisodeConfig cfg;
    cfg.seed = seed;
    cfg.K = 6;
    const auto t = run_baseline_episode(origin, user, s, cfg, 16);
    CHECK(t.snapshots.size() == t.steps.size() + 1);
    for (std::size_t k = 1; k < t.losses.size(); ++k) CHECK(t.losses[k] <= t.losses[k - 1]);
  }
}

TEST_CASE("checkpoint round trip and mismatch rejection") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "storyline_ckpt_test";
  fs::create_directories(dir);
  Checkpoint c;
  c.policy = Policy::create(ActionSpace{}, 24, {16, 8}, 77);
  nets::randomize(c.policy.params, 78, 0.3);
  c.episode.K = 9;
  c.metadata = {{"episodes", 12}};
  const auto path = (dir / "a.ckpt").string();
  save_checkpoint(path, c);
  const auto back = load_checkpoint(path);
  CHECK(back.policy.params.flatten() == c.policy.params.flatten());
  CHECK(back.policy.params.config == c.policy.params.config);
  CHECK(back.policy.space == c.policy.space);
  CHECK(back.policy.H == 24);
  CHECK(back.episode.K == 9);
  CHECK(back.metadata == c.metadata);
  CHECK_NOTHROW(load_checkpoint(path, c.policy.params.config));

  auto other = c.policy.params.config;
  other.widths = {16, 4};
  CHECK_THROWS_AS(load_checkpoint(path, other), ShapeMismatch);

  {
    std::ofstream f(path, std::ios::binary | std::ios::app);
    f.put('x');
  }
  CHECK_THROWS_AS(load_checkpoint(path), ShapeMismatch);
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path), SyntaxError);
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), SyntaxError);
  fs::remove_all(dir);
}

TEST_CASE("episodes stop on zero loss and are reproducible") {
  const auto s = ts3();
  const auto origin = layout(s, {});
  const auto policy = Policy::create(ActionSpace{}, 24, {16, 8}, 5);
  EpisodeConfig cfg;
  cfg.seed = 3;
  const auto same = run_episode(policy, origin, origin, s, cfg, Mode::kGreedy);
  CHECK(same.steps.empty());
  CHECK(same.final_loss() == 0.0);

  const auto user = shifted_user(s, origin);
  const auto a = run_episode(policy, origin, user, s, cfg, Mode::kSample);
  const auto b = run_episode(policy, origin, user, s, cfg, Mode::kSample);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    CHECK(a.steps[k].head == b.steps[k].head);
    CHECK(a.steps[k].index == b.steps[k].index);
  }
  CHECK(a.losses == b.losses);
  CHECK(a.snapshots.size() == a.steps.size() + 1);
  const auto r = a.rewards();
  double sum = 0.0;
  for (double v : r) sum += v;
  CHECK(sum == doctest::Approx(a.losses.front() - a.final_loss()));

  std::atomic<bool> stop{true};
  const auto stopped = run_episode(policy, origin, user, s, cfg, Mode::kGreedy, &stop);
  CHECK(stopped.stopped);
  CHECK(stopped.steps.empty());
}

namespace {

nlohmann::json episode_record(const Trajectory& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"head", to_string(s.head)},
                     {"index", s.index},
                     {"constraint", constraint_to_json(s.constraint)},
                     {"applied", s.applied}});
  }
  return {{"steps", steps}, {"losses", t.losses}};
}

}  // namespace

TEST_CASE("ts3 episode matches the golden record") {
  const auto s = ts3();
  const auto origin = layout(s, {});
  const auto user = shifted_user(s, origin);
  auto policy = Policy::create(ActionSpace{}, 100, {512, 256, 128}, 2024);
  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto& h : policy.params.heads) {
    for (Eigen::Index k = 0; k < h.W.size(); ++k) h.W.data()[k] = u(rng);
  }
  EpisodeConfig cfg;
  cfg.seed = 11;
  const nlohmann::json got = {{"greedy", episode_record(run_episode(policy, origin, user, s, cfg, Mode::kGreedy))},
                              {"sample", episode_record(run_episode(policy, origin, user, s, cfg, Mode::kSample))}};
  const auto path = oracle::data_path("fixtures/ts3_episode_golden.json");
  if (std::getenv("STORYLINE_UPDATE_GOLDEN")) {
    std::ofstream(path) << got.dump(2) << "\n";
  }
  std::ifstream in(path);
  REQUIRE(in.good());
  const auto want = nlohmann::json::parse(in);
  for (const char* mode : {"greedy", "sample"}) {
    CHECK(got[mode]["steps"] == want[mode]["steps"]);
    const auto& gl = got[mode]["losses"];
    const auto& wl = want[mode]["losses"];
    REQUIRE(gl.size() == wl.size());
    for (std::size_t k = 0; k < gl.size(); ++k) CHECK(gl[k].get<double>() == doctest::Approx(wl[k].get<double>()).epsilon(1e-9));
  }
}
