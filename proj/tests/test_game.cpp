// Copyright 2026 The Equilens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include "doctest.h"
#include "equilens/game.hpp"
#include "equilens/rng.hpp"

using namespace equilens;

namespace {

JointHistory history_of(const Game& g, std::initializer_list<JointAction> rounds) {
  JointHistory h(g);
  for (const auto& r : rounds) h.push(r);
  return h;
}

JointHistory repeat(const Game& g, JointAction a, int n) {
  JointHistory h(g);
  for (int i = 0; i < n; ++i) h.push(a);
  return h;
}

// Distance recomputed from raw counts, independent of the tracker.
double brute_distance(const JointHistory& h, std::size_t t, const Equilibria& eqs) {
  double ca = 0, cb = 0;
  for (std::size_t i = 0; i < t; ++i) {
    ca += h[i].a == 0;
    cb += h[i].b == 0;
  }
  const double pa = ca / static_cast<double>(t);
  const double pb = cb / static_cast<double>(t);
  double best = 1e300;
  for (const auto& e : eqs.profiles) {
    const double d = std::sqrt(2 * std::pow(pa - e.strat_a(0), 2) + 2 * std::pow(pb - e.strat_b(0), 2));
    best = std::min(best, d);
  }
  return best;
}

}  // namespace

TEST_CASE("canonical equilibria") {
  const auto pd = enumerate_equilibria(make_game("pd"));
  REQUIRE(pd.profiles.size() == 1);
  CHECK(pd.profiles[0].kind == EquilibriumKind::kPure);
  CHECK(pd.profiles[0].strat_a == pure_strategy(1));
  CHECK(pd.profiles[0].strat_b == pure_strategy(1));

  const auto mp = enumerate_equilibria(make_game("mp"));
  REQUIRE(mp.profiles.size() == 1);
  CHECK(mp.profiles[0].kind == EquilibriumKind::kMixed);
  CHECK(mp.profiles[0].strat_a(0) == doctest::Approx(0.5));
  CHECK(mp.profiles[0].strat_b(0) == doctest::Approx(0.5));

  const auto bos = enumerate_equilibria(make_game("bos"));
  REQUIRE(bos.profiles.size() == 3);
  CHECK(bos.profiles[0].strat_a == pure_strategy(0));
  CHECK(bos.profiles[0].strat_b == pure_strategy(0));
  CHECK(bos.profiles[1].strat_a == pure_strategy(1));
  CHECK(bos.profiles[1].strat_b == pure_strategy(1));
  CHECK(bos.profiles[2].kind == EquilibriumKind::kMixed);
  CHECK(bos.profiles[2].strat_a(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(bos.profiles[2].strat_b(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  const auto sh = enumerate_equilibria(make_game("sh"));
  REQUIRE(sh.profiles.size() == 3);
  CHECK(sh.profiles[2].strat_a(0) == doctest::Approx(0.75));

  for (const auto& name : canonical_game_names()) {
    const auto eqs = enumerate_equilibria(make_game(name));
    CHECK_FALSE(eqs.degenerate);
    for (const auto& p : eqs.profiles) CHECK(max_deviation_gain(eqs.game, p) <= 1e-12);
  }
}

TEST_CASE("mixed equilibrium can be excluded") {
  const auto bos = enumerate_equilibria(make_game("bos"), {.include_mixed = false});
  CHECK(bos.profiles.size() == 2);
  const auto mp = enumerate_equilibria(make_game("mp"), {.include_mixed = false});
  CHECK(mp.profiles.size() == 1);
}

TEST_CASE("degenerate game reports vertices and the flag") {
  const Game g = make_custom_game("flat", {"X", "Y"}, {"X", "Y"},
                                  {{{{1, 1}}, {{1, 1}}}, {{{1, 1}}, {{1, 1}}}});
  const auto eqs = enumerate_equilibria(g);
  CHECK(eqs.degenerate);
  CHECK(eqs.profiles.size() >= 1);
  for (const auto& p : eqs.profiles) CHECK(max_deviation_gain(g, p) <= 1e-12);
}

TEST_CASE("empirical mixed strategy") {
  const Game pd = make_game("pd");
  CHECK(empirical_mixed_strategy(repeat(pd, {0, 0}, 50), Player::A) == pure_strategy(0));
  const auto h = history_of(pd, {{0, 1}, {1, 1}});
  CHECK(empirical_mixed_strategy(h, Player::A) == MixedStrategy(0.5, 0.5));
  CHECK(empirical_mixed_strategy(h, Player::B) == MixedStrategy(0.0, 1.0));
  CHECK(empirical_mixed_strategy(h, Player::A, 1) == MixedStrategy(1.0, 0.0));

  const Game mp = make_game("mp");
  JointHistory m(mp);
  for (int i = 0; i < 50; ++i) m.push(i < 44 ? 0 : 1, 1);
  const auto mu = empirical_mixed_strategy(m, Player::A);
  CHECK(mu(0) == doctest::Approx(0.88).epsilon(1e-15));
  CHECK(mu(1) == doctest::Approx(0.12).epsilon(1e-15));
  CHECK(mu.sum() == 1.0);

  CHECK_THROWS_AS(empirical_mixed_strategy(JointHistory(pd), Player::A), GameError);
}

TEST_CASE("nash distance values") {
  const Game pd = make_game("pd");
  const auto pd_eq = enumerate_equilibria(pd);
  CHECK(nash_distance(repeat(pd, {0, 0}, 50), pd_eq) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(nash_distance(repeat(pd, {1, 1}, 50), pd_eq) == 0.0);
  CHECK(nash_distance(repeat(pd, {0, 0}, 1), pd_eq) == doctest::Approx(2.0));

  const auto mp_eq = enumerate_equilibria(make_game("mp"));
  const NashDistance d =
      nash_distance(MixedStrategy(0.88, 0.12), MixedStrategy(0.06, 0.94), mp_eq);
  CHECK(d.value == doctest::Approx(std::sqrt(2 * 0.38 * 0.38 + 2 * 0.44 * 0.44)).epsilon(1e-12));
  CHECK(std::abs(d.value - 0.822) < 5e-4);

  // PD symmetric cooperation rate c gives 2c.
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const double c = rng.uniform();
    const MixedStrategy mu(c, 1 - c);
    CHECK(nash_distance(mu, mu, pd_eq).value == doctest::Approx(2 * c).epsilon(1e-12));
  }
  const MixedStrategy mu(0.62, 0.38);
  CHECK(std::abs(nash_distance(mu, mu, pd_eq).value - 1.24) < 1e-9);
}

TEST_CASE("nash distance is zero exactly at an equilibrium") {
  const auto bos = enumerate_equilibria(make_game("bos"));
  for (const auto& p : bos.profiles) {
    CHECK(nash_distance(p.strat_a, p.strat_b, bos).value < 1e-12);
  }
  const auto mp = enumerate_equilibria(make_game("mp"));
  const auto h = history_of(make_game("mp"), {{0, 0}, {1, 1}});
  CHECK(nash_distance(h, mp) == 0.0);
}

TEST_CASE("nearest equilibrium tie goes to the first profile") {
  const auto bos = enumerate_equilibria(make_game("bos"), {.include_mixed = false});
  const NashDistance d = nash_distance(MixedStrategy(0.5, 0.5), MixedStrategy(0.5, 0.5), bos);
  CHECK(d.nearest == 0);
}

TEST_CASE("distance is invariant under action relabeling") {
  const Game sh = make_game("sh");
  const Game swapped = make_custom_game("sh_swapped", {"Hare", "Stag"}, {"Hare", "Stag"},
                                        {{{{3, 3}}, {{3, 0}}}, {{{0, 3}}, {{4, 4}}}});
  Rng rng(8);
  JointHistory h(sh);
  JointHistory hs(swapped);
  for (int i = 0; i < 40; ++i) {
    const int a = static_cast<int>(rng.below(2));
    const int b = static_cast<int>(rng.below(2));
    h.push(a, b);
    hs.push(1 - a, 1 - b);
  }
  CHECK(nash_distance(h, enumerate_equilibria(sh)) ==
        doctest::Approx(nash_distance(hs, enumerate_equilibria(swapped))).epsilon(1e-12));
}

TEST_CASE("distance series matches per-prefix recomputation") {
  const Game pd = make_game("pd");
  const auto eqs = enumerate_equilibria(pd);
  JointHistory alt(pd);
  for (int i = 0; i < 50; ++i) alt.push(i % 2 == 0 ? JointAction{0, 0} : JointAction{1, 1});
  const auto s = nash_distance_series(alt, eqs);
  REQUIRE(s.size() == 50);
  for (std::size_t t = 1; t <= 50; ++t) {
    CHECK(s[t - 1] == doctest::Approx(brute_distance(alt, t, eqs)).epsilon(1e-12));
  }
  CHECK(s[0] == doctest::Approx(2.0));
  CHECK(s[1] == doctest::Approx(1.0));
  CHECK(s[49] == doctest::Approx(1.0));

  const auto zeros = nash_distance_series(repeat(pd, {1, 1}, 50), eqs);
  for (double v : zeros) CHECK(v == 0.0);

  for (const auto& name : canonical_game_names()) {
    const Game g = make_game(name);
    const auto e = enumerate_equilibria(g);
    Rng rng(fnv1a64(name));
    JointHistory h(g);
    NashDistanceTracker tracker(e);
    for (int i = 0; i < 60; ++i) {
      const JointAction a{static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))};
      h.push(a);
      const double inc = tracker.add(a);
      CHECK(inc == doctest::Approx(brute_distance(h, h.size(), e)).epsilon(1e-12));
      CHECK(inc == doctest::Approx(nash_distance(h, e)).epsilon(1e-12));
    }
  }
}

TEST_CASE("history horizon and prefix") {
  const Game pd = make_game("pd");
  JointHistory h(pd, 2);
  h.push(0, 0);
  h.push(0, 1);
  CHECK_THROWS(h.push(1, 1));
  CHECK_THROWS(h.push(JointAction{2, 0}));
  CHECK(h.prefix(1).size() == 1);
  CHECK(h.action(Player::B, 1) == 1);
}

TEST_CASE("game definitions from JSON") {
  const auto j = nlohmann::json::parse(R"({"name":"chicken","actions_a":["Swerve","Straight"],
      "actions_b":["Swerve","Straight"],"payoffs":[[[0,0],[-1,1]],[[1,-1],[-10,-10]]]})");
  const Game g = game_from_json(j);
  CHECK(g.payoff_a(1, 1) == -10);
  CHECK(g.payoff_b(0, 1) == 1);
  CHECK(g.action_index(Player::A, "straight") == 1);
  CHECK(game_from_json(game_to_json(g)) == g);
  CHECK(game_from_json("pd") == make_game("pd"));
  CHECK(enumerate_equilibria(g).profiles.size() == 3);

  CHECK_THROWS_AS(make_game("chess"), GameError);
  CHECK_THROWS_AS(game_from_json(nlohmann::json::parse(R"({"name":"x","actions_a":["A"],
      "actions_b":["A","B"],"payoffs":[[[0,0],[0,0]],[[0,0],[0,0]]]})")),
                  GameError);
  CHECK_THROWS_AS(game_from_json(nlohmann::json::parse(R"({"name":"x","actions_a":["A","A"],
      "actions_b":["A","B"],"payoffs":[[[0,0],[0,0]],[[0,0],[0,0]]]})")),
                  GameError);
}
