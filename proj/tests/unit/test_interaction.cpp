#include "doctest.h"
#include "../support/oracles.hpp"

#include "storyline/engine.hpp"
#include "storyline/errors.hpp"
#include "storyline/interaction.hpp"
#include "storyline/serialize.hpp"

#include <set>

using namespace storyline;

namespace {

StoryScript ts3() { return load_script_file(oracle::data_path("fixtures/ts3.json")); }
StoryScript league() { return load_script_file(oracle::data_path("scripts/justice_league.json")); }

Selection everything(const Layout& l, std::size_t j0, std::size_t j1) {
  Selection s;
  for (std::size_t i = 0; i < l.num_characters(); ++i) s.segments.push_back({static_cast<int>(i), j0, j1});
  return s;
}

// reference polyline evaluation, clamped at both ends
double path_y(const std::vector<Point>& pts, double x) {
  if (x <= pts.front().x) return pts.front().y;
  if (x >= pts.back().x) return pts.back().y;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (x <= pts[k].x) {
      const double t = (x - pts[k - 1].x) / (pts[k].x - pts[k - 1].x);
      return pts[k - 1].y + t * (pts[k].y - pts[k - 1].y);
    }
  }
  return pts.back().y;
}

std::vector<NarrativeConstraint> widen(const std::vector<OrderingConstraint>& cs) {
  return {cs.begin(), cs.end()};
}

}  // namespace

TEST_CASE("shift C to the top of ts3 slot 0") {
  const auto s = ts3();
  const auto l = layout(s, {});
  const int c = find_character(s, "C");
  const auto cs = shift(l, c, 0, 0);
  REQUIRE(cs.size() == 2);
  std::set<int> passed;
  for (const auto& o : cs) {
    CHECK(o.slot == 0);
    CHECK(o.ahead == c);
    passed.insert(o.behind);
  }
  CHECK(passed == std::set<int>{find_character(s, "A"), find_character(s, "B")});
  const auto next = layout(s, widen(cs));
  CHECK(next.order(static_cast<std::size_t>(c), 0) == 0);
  CHECK(check_layout(s, next, widen(cs)).empty());
}

TEST_CASE("shift to the current rank is empty") {
  const auto s = ts3();
  const auto l = layout(s, {});
  for (std::size_t j = 0; j < l.num_slots(); ++j) {
    for (std::size_t i = 0; i < l.num_characters(); ++i) {
      if (l.active(i, j)) CHECK(shift(l, static_cast<int>(i), j, l.order(i, j)).empty());
    }
  }
  CHECK_THROWS_AS(shift(l, 0, 0, 3), IndexError);
  CHECK_THROWS_AS(shift(l, 0, 7, 0), IndexError);
  CHECK_THROWS_AS(shift(l, 9, 0, 0), IndexError);
}

TEST_CASE("moving steppenwolf below every hero passes each of them once") {
  const auto s = league();
  const auto l = layout(s, {});
  const int villain = find_character(s, "Steppenwolf");
  const std::size_t j = 2;
  const auto actives = active_set(s, j);
  const auto v = static_cast<std::size_t>(villain);
  int heroes_below = 0;
  for (auto i : actives) {
    if (i != villain && l.order(static_cast<std::size_t>(i), j) > l.order(v, j)) ++heroes_below;
  }
  const auto cs = shift(l, villain, j, static_cast<int>(actives.size()) - 1);
  CHECK(static_cast<int>(cs.size()) == heroes_below);
  // from the top of the slot this is every hero
  const auto top = shift(layout(s, widen(shift(l, villain, j, 0))), villain, j, static_cast<int>(actives.size()) - 1);
  CHECK(top.size() == 6);
  for (const auto& o : top) CHECK(o.behind == villain);
  const auto next = layout(s, widen(top));
  CHECK(check_layout(s, next, widen(top)).empty());
  CHECK(next.order(v, j) == static_cast<int>(actives.size()) - 1);
}

TEST_CASE("bend emits one indicator per transition") {
  const auto s = ts3();
  const auto l = layout(s, {});
  const int a = find_character(s, "A");
  const auto cs = bend(l, a, 0, 2, true);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0] == AlignmentConstraint{a, 1, 1});
  CHECK(cs[1] == AlignmentConstraint{a, 2, 1});
  const std::vector<NarrativeConstraint> nc(cs.begin(), cs.end());
  const auto next = layout(s, nc);
  CHECK(next.align(static_cast<std::size_t>(a), 1) == 1);
  CHECK(next.align(static_cast<std::size_t>(a), 2) == 1);
  CHECK(next.pos(static_cast<std::size_t>(a), 0) == doctest::Approx(next.pos(static_cast<std::size_t>(a), 2)));

  const auto off = bend(l, a, 0, 2, false);
  const std::vector<NarrativeConstraint> noff(off.begin(), off.end());
  const auto bent = layout(s, noff);
  CHECK(bent.align(static_cast<std::size_t>(a), 1) == 0);
  CHECK(bent.align(static_cast<std::size_t>(a), 2) == 0);

  std::vector<NarrativeConstraint> both = nc;
  both.emplace_back(AlignmentConstraint{a, 1, 0});
  CHECK_THROWS_AS(layout(s, both), ConstraintConflict);
  CHECK_THROWS_AS(bend(l, a, 1, 5, true), IndexError);
}

TEST_CASE("scale widens the gap between the two sessions") {
  const auto s = ts3();
  const auto l = layout(s, {});
  const int b = find_character(s, "B"), c = find_character(s, "C"), a = find_character(s, "A");
  // B is the member of {A,B} adjacent to C at slot 0
  const auto cc = scale(l, b, c, 0, 50.0, 60.0);
  CHECK(cc.d1 == 50.0);
  CHECK(cc.d2 == 60.0);
  const auto next = layout(s, {cc});
  const double gap = std::abs(next.pos(static_cast<std::size_t>(b), 0) - next.pos(static_cast<std::size_t>(c), 0));
  CHECK(gap > 50.0);
  CHECK(gap < 60.0);
  CHECK_THROWS_AS(scale(l, b, c, 0, 60.0, 50.0), BadBounds);
  CHECK_THROWS_AS(scale(l, b, c, 0, -1.0, 50.0), BadBounds);
  CHECK_THROWS_AS(scale(l, a, c, 0, 50.0, 60.0), NotAdjacent);
}

TEST_CASE("horizontal transform is the identity") {
  const auto s = ts3();
  const auto l = layout(s, {});
  const auto out = transform(l, everything(l, 0, 2), StrokePath{{{0, 40}, {200, 40}}});
  CHECK(identical(out, l));
}

TEST_CASE("staircase transform translates each slot rigidly") {
  const auto s = ts3();
  const auto l = layout(s, {});
  const std::vector<Point> pts{{0, 0}, {100, 15}, {200, 45}};
  const auto out = transform(l, everything(l, 0, 2), StrokePath{pts});
  const double base = path_y(pts, l.slot_x[0]);
  for (std::size_t j = 0; j < 3; ++j) {
    const double d = path_y(pts, l.slot_x[j]) - base;
    for (std::size_t i = 0; i < 3; ++i) CHECK(out.pos(i, j) == doctest::Approx(l.pos(i, j) + d));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(out.pos(i, j) - out.pos(k, j) == doctest::Approx(l.pos(i, j) - l.pos(k, j)));
      }
    }
  }
  CHECK(out.order == l.order);
}

TEST_CASE("parabola transform over the league climax") {
  const auto s = league();
  const auto l = layout(s, {});
  std::vector<Point> pts;
  for (int t = 0; t <= 20; ++t) {
    const double x = 350.0 + 20.0 * t;  // covers slots 4..7
    const double u = (x - 550.0) / 200.0;
    pts.push_back({x, -60.0 * (1.0 - u * u)});
  }
  std::vector<int> picked{find_character(s, "Batman"), find_character(s, "Superman"), find_character(s, "Cyborg")};
  Selection sel;
  for (int c : picked) sel.segments.push_back({c, 4, 6});
  const auto out = transform(l, sel, StrokePath{pts});
  const auto cells = selected_cells(l, sel);
  REQUIRE(!cells.empty());
  const std::size_t first = cells.front().second;
  for (std::size_t j = 0; j < l.num_slots(); ++j) {
    for (std::size_t i = 0; i < l.num_characters(); ++i) {
      if (!l.active(i, j)) continue;
      const bool in = j >= 4 && j <= 6 && std::find(picked.begin(), picked.end(), static_cast<int>(i)) != picked.end();
      const double d = in ? path_y(pts, l.slot_x[j]) - path_y(pts, l.slot_x[first]) : 0.0;
      CHECK(out.pos(i, j) == doctest::Approx(l.pos(i, j) + d));
    }
  }
  for (std::size_t j : {0u, 1u, 2u, 8u, 9u}) {
    for (std::size_t i = 0; i < l.num_characters(); ++i) CHECK(out.order(i, j) == l.order(i, j));
  }
  CHECK_THROWS_AS(transform(l, Selection{}, StrokePath{pts}), EmptySelection);
}

TEST_CASE("transform keeps the order of unselected characters") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = oracle::random_script(rng, 6, 6, 0.8, 3, 3);
    const auto l = layout(s, {});
    Selection sel;
    sel.segments.push_back({0, 0, s.num_slots() - 1});
    std::uniform_real_distribution<double> dy(-80, 80);
    std::vector<Point> pts;
    for (std::size_t j = 0; j < s.num_slots(); ++j) pts.push_back({l.slot_x[j], dy(rng)});
    const auto out = transform(l, sel, StrokePath{pts});
    for (std::size_t j = 0; j < l.num_slots(); ++j) {
      for (std::size_t a = 1; a < l.num_characters(); ++a) {
        for (std::size_t b = 1; b < l.num_characters(); ++b) {
          if (!l.active(a, j) || !l.active(b, j)) continue;
          CHECK(out.pos(a, j) == l.pos(a, j));
          if (l.order(a, j) < l.order(b, j)) CHECK(out.order(a, j) < out.order(b, j));
        }
      }
    }
  }
}

TEST_CASE("attract with factor one collapses onto the axis") {
  const auto s = ts3();
  const auto l = layout(s, {});
  const auto out = attract_repel(l, everything(l, 0, 2), StrokePath{{{0, 25}, {200, 25}}}, Pull::kAttract, 1.0);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 3; ++i) CHECK(out.pos(i, j) == doctest::Approx(25.0));
  }
}

TEST_CASE("repel by half moves y*+20 to y*+30") {
  const auto s = ts3();
  const auto l = layout(s, {});
  const int a = find_character(s, "A");
  const double ystar = l.pos(static_cast<std::size_t>(a), 0) - 20.0;
  Selection sel;
  sel.segments.push_back({a, 0, 0});
  const auto out = attract_repel(l, sel, StrokePath{{{-10, ystar}, {300, ystar}}}, Pull::kRepel, 0.5);
  CHECK(out.pos(static_cast<std::size_t>(a), 0) == doctest::Approx(ystar + 30.0));
  CHECK_THROWS_AS(attract_repel(l, Selection{}, StrokePath{{{0, 0}, {1, 0}}}, Pull::kRepel), EmptySelection);
}

TEST_CASE("repelling superman from the league grows every distance") {
  const auto s = league();
  const auto l = layout(s, {});
  const auto sup = static_cast<std::size_t>(find_character(s, "Superman"));
  const auto bat = static_cast<std::size_t>(find_character(s, "Batman"));
  std::vector<Point> axis;
  for (std::size_t j = 5; j <= 6; ++j) axis.push_back({l.slot_x[j], l.pos(bat, j)});
  Selection sel;
  sel.segments.push_back({static_cast<int>(sup), 5, 6});
  auto cur = l;
  for (int round = 0; round < 3; ++round) {
    const auto next = attract_repel(cur, sel, StrokePath{axis}, Pull::kRepel, 0.5);
    for (std::size_t j = 5; j <= 6; ++j) {
      const double ystar = path_y(axis, l.slot_x[j]);
      CHECK(std::abs(next.pos(sup, j) - ystar) > std::abs(cur.pos(sup, j) - ystar));
    }
    cur = next;
  }
}

TEST_CASE("relate and stylish leave geometry untouched") {
  const auto s = ts3();
  const auto l = layout(s, {});
  const int a = find_character(s, "A"), b = find_character(s, "B"), c = find_character(s, "C");
  Selection pair;
  pair.segments = {{a, 1, 2}, {b, 1, 2}};
  const auto tw = relate(l, pair, StyleKind::kTwined);
  REQUIRE(tw.styles.size() == 1);
  CHECK(tw.styles[0].kind == StyleKind::kTwined);
  CHECK(identical_positions(tw.pos, l.pos));
  CHECK(tw.order == l.order);
  CHECK(tw.align == l.align);

  Selection lone;
  lone.segments = {{a, 0, 2}};
  CHECK_THROWS_AS(relate(l, lone, StyleKind::kMerged), EmptySelection);

  Selection trio;
  trio.segments = {{a, 2, 2}, {b, 2, 2}, {c, 2, 2}};
  const auto two = relate(tw, trio, StyleKind::kMerged);
  REQUIRE(two.styles.size() == 2);
  CHECK(two.styles[0].kind == StyleKind::kTwined);
  CHECK(two.styles[1].kind == StyleKind::kMerged);

  const auto dashed = stylish(l, c, 0, 1, StyleKind::kDashed);
  REQUIRE(dashed.styles.size() == 1);
  CHECK(dashed.styles[0].kind == StyleKind::kDashed);
  CHECK(identical_positions(dashed.pos, l.pos));

  const nlohmann::json icon = {{"icon", "sword.svg"}, {"x", 120.5}, {"y", -4}};
  const auto ann = stylish(l, a, 1, 1, StyleKind::kAnnotation, icon);
  CHECK(ann.styles.at(0).payload == icon);
  CHECK_THROWS_AS(stylish(l, 11, 0, 1, StyleKind::kDashed), IndexError);
}

TEST_CASE("interaction messages round-trip through json") {
  const std::vector<nlohmann::json> docs = {
      {{"type", "shift"}, {"character", 2}, {"slot", 0}, {"target_rank", 0}},
      {{"type", "bend"}, {"character", 0}, {"slot_begin", 0}, {"slot_end", 2}, {"straight", true}},
      {{"type", "scale"}, {"pair", {1, 2}}, {"slot", 0}, {"bounds", {50.0, 60.0}}},
      {{"type", "stylish"}, {"character", 2}, {"slot_begin", 0}, {"slot_end", 1}, {"kind", "dashed"},
       {"payload", nlohmann::json::object()}},
  };
  for (const auto& d : docs) {
    const auto m = parse_interaction(d);
    CHECK(interaction_to_json(m) == d);
    CHECK(interaction_to_json(parse_interaction(interaction_to_json(m))) == d);
  }
  CHECK(generates_constraints(parse_interaction(docs[0])));
  CHECK_FALSE(generates_constraints(parse_interaction(docs[3])));
  CHECK_THROWS_AS(parse_interaction({{"type", "teleport"}}), SyntaxError);
  CHECK_THROWS_AS(parse_interaction({{"type", "shift"}, {"slot", 0}}), SyntaxError);
}
