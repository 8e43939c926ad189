#include "doctest.h"
#include "../support/oracles.hpp"

#include "storyline/engine.hpp"
#include "storyline/errors.hpp"
#include "storyline/interaction.hpp"
#include "storyline/reward.hpp"

using namespace storyline;

namespace {

StoryScript ts3() { return load_script_file(oracle::data_path("fixtures/ts3.json")); }

double sig(double x) { return 2.0 / (1.0 + std::exp(-x)) - 1.0; }

}  // namespace

TEST_CASE("features match naive scans on random matrices") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    std::uniform_int_distribution<std::size_t> nd(1, 10), md(1, 20);
    const auto [a, b] = oracle::random_pair(rng, nd(rng), md(rng));
    CHECK(order_similarity(a, b) == oracle::naive_order(a, b));
    CHECK(align_similarity(a, b) == oracle::naive_align(a, b));
    CHECK(position_distance(a, b) == doctest::Approx(oracle::naive_distance(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("identity and reversal counts") {
  const std::size_t n = 3, m = 3;
  Layout a;
  a.order = OrderMatrix(n, m, 0);
  a.align = AlignMatrix(n, m, 1);
  a.pos = PositionMatrix(n, m, 0.0);
  a.slot_x = {0, 100, 200};
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      a.order(i, j) = static_cast<int>(i);
      a.pos(i, j) = 10.0 * static_cast<double>(i);
    }
  }
  CHECK(order_similarity(a, a) == 9);
  CHECK(align_similarity(a, a) == 9);
  CHECK(position_distance(a, a) == 0);
  auto r = a;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) r.order(i, j) = static_cast<int>(n - 1 - i);
  }
  CHECK(order_similarity(a, r) == 3);

  auto z = a;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j < m; ++j) z.align(i, j) = 0;
  }
  CHECK(align_similarity(a, z) == 3);
}

TEST_CASE("single differing cell gives its normalized offset") {
  // the outer two cells pin the extent while the middle one moves
  Layout a;
  a.slot_x = {0};
  a.order = OrderMatrix(3, 1, 0);
  a.align = AlignMatrix(3, 1, 1);
  a.pos = PositionMatrix(3, 1, 0.0);
  a.order(1, 0) = 1;
  a.order(2, 0) = 2;
  a.pos(1, 0) = 50.0;
  a.pos(2, 0) = 100.0;
  auto b = a;
  b.pos(1, 0) = 80.0;
  CHECK(position_distance(a, b) == doctest::Approx(0.3));
}

TEST_CASE("dimension mismatch is rejected") {
  std::mt19937_64 rng(1);
  const auto [a, b] = oracle::random_pair(rng, 3, 4);
  const auto [c, d] = oracle::random_pair(rng, 3, 5);
  CHECK_THROWS_AS(order_similarity(a, c), DimensionMismatch);
  CHECK_THROWS_AS(align_similarity(b, d), DimensionMismatch);
  CHECK_THROWS_AS(position_distance(a, d), DimensionMismatch);
  CHECK_THROWS_AS(combined_loss(a, c), DimensionMismatch);
}

TEST_CASE("combined loss of a layout with itself is zero") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    const auto [a, b] = oracle::random_pair(rng, 6, 8);
    CHECK(combined_loss(a, a) == 0.0);
    CHECK(combined_loss(a, b) >= 0.0);
    CHECK(combined_loss(a, b) == doctest::Approx(combined_loss(b, a)));
  }
  const auto l = layout(ts3(), {});
  CHECK(combined_loss(l, l) == 0.0);
}

TEST_CASE("squash is monotone and bounded") {
  CHECK(squash(0.0) == 0.0);
  double prev = 0.0;
  for (double x = 0.25; x < 40; x += 0.25) {
    const double v = squash(x);
    CHECK(v > prev - 1e-15);
    CHECK(v < 1.0 + 1e-15);
    prev = v;
  }
  CHECK(squash(1.0) > 0.0);
}

TEST_CASE("ts3 loss matches the hand-composed formula") {
  const auto s = ts3();
  const auto origin = layout(s, {});
  const auto cs = shift(origin, find_character(s, "C"), 0, 0);
  const auto user = layout(s, {cs.begin(), cs.end()});
  const double nm = 9.0;
  const double expect = sig(nm - oracle::naive_order(origin, user)) + sig(nm - oracle::naive_align(origin, user)) +
                        sig(oracle::naive_distance(origin, user));
  CHECK(combined_loss(origin, user) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(combined_loss(origin, user) > 0.0);

  RewardConfig w{2.0, 0.5, 0.0, 1.0};
  const double wexpect = 2.0 * sig(nm - oracle::naive_order(origin, user)) + 0.5 * sig(nm - oracle::naive_align(origin, user));
  CHECK(combined_loss(origin, user, w) == doctest::Approx(wexpect).epsilon(1e-9));
  CHECK_THROWS_AS(RewardConfig({0, 0, 0, 1}).validate(), ValidationError);
  CHECK_THROWS_AS(RewardConfig({1, 1, 1, 1.5}).validate(), ValidationError);
}

TEST_CASE("loss increases with each raw mismatch") {
  RewardConfig cfg;
  const std::size_t cells = 20;
  double prev = -1.0;
  for (int k = 0; k <= 20; ++k) {
    const double v = combined_loss(FeatureVector{20.0 - k, 20.0, 0.0}, cells, cfg);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(combined_loss(FeatureVector{20.0, 19.0, 0.0}, cells) > 0.0);
  CHECK(combined_loss(FeatureVector{20.0, 20.0, 0.01}, cells) > 0.0);
}

TEST_CASE("step reward and discounted returns") {
  CHECK(step_reward(0.8, 0.5) == doctest::Approx(0.3));
  CHECK(step_reward(0.5, 0.5) == 0.0);
  CHECK(step_reward(0.5, 0.7) < 0.0);
  const auto r = discounted_return({1, 1, 1}, 0.5);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == doctest::Approx(1.75));
  CHECK(r[1] == doctest::Approx(1.5));
  CHECK(r[2] == doctest::Approx(1.0));
  const auto z = discounted_return({0.2, -0.1, 0.4}, 0.0);
  CHECK(z == std::vector<double>{0.2, -0.1, 0.4});
}

TEST_CASE("rewards telescope exactly over random losses") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto [a, b] = oracle::random_pair(rng, 5, 6);
    std::vector<double> losses{combined_loss(a, b)};
    for (int k = 0; k < 15; ++k) {
      const auto [c, d] = oracle::random_pair(rng, 5, 6);
      losses.push_back(combined_loss(c, d));
    }
    std::vector<double> rewards;
    for (std::size_t k = 1; k < losses.size(); ++k) rewards.push_back(step_reward(losses[k - 1], losses[k]));
    // losses are multiples of 2^-40, so the differences and their sum are exact
    CHECK(discounted_return(rewards, 1.0)[0] == losses.front() - losses.back());
  }
}
