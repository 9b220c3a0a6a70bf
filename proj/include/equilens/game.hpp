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

#ifndef EQUILENS_GAME_HPP_
#define EQUILENS_GAME_HPP_

// Two-player 2x2 games, exact equilibrium enumeration and the Nash-distance
// metric over empirical play.

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace equilens {

class GameError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Player { A, B };

inline Player other(Player p) { return p == Player::A ? Player::B : Player::A; }
inline const char* to_string(Player p) { return p == Player::A ? "A" : "B"; }

using ActionLabels = std::array<std::string, 2>;
// A mixed strategy over the two actions of one player.
using MixedStrategy = Eigen::Vector2d;

struct Game {
  std::string name;
  ActionLabels actions_a;
  ActionLabels actions_b;
  // Rows index player A's action, columns player B's action.
  Eigen::Matrix2d payoff_a;
  Eigen::Matrix2d payoff_b;

  const ActionLabels& actions(Player p) const {
    return p == Player::A ? actions_a : actions_b;
  }
  const Eigen::Matrix2d& payoff(Player p) const {
    return p == Player::A ? payoff_a : payoff_b;
  }
  // Case-insensitive label lookup.
  std::optional<int> action_index(Player p, std::string_view label) const;

  bool operator==(const Game& other) const;
};

// Canonical games: "pd", "bos", "sh", "mp".
Game make_game(std::string_view name);

// payoffs[i][j] = {payoff to A, payoff to B} when A plays i and B plays j.
Game make_custom_game(std::string name, ActionLabels actions_a,
                      ActionLabels actions_b,
                      const std::vector<std::vector<std::array<double, 2>>>& payoffs);

// {name, actions_a, actions_b, payoffs: [[[pa,pb],[pa,pb]],[[..],[..]]]}
Game game_from_json(const nlohmann::json& j);
nlohmann::ordered_json game_to_json(const Game& game);

std::vector<std::string> canonical_game_names();

// True when entries lie in [0,1] and sum to one within `tol`.
bool is_mixed_strategy(const MixedStrategy& s, double tol = 1e-9);
MixedStrategy pure_strategy(int action);

enum class EquilibriumKind { kPure, kMixed };

struct EquilibriumProfile {
  MixedStrategy strat_a;
  MixedStrategy strat_b;
  EquilibriumKind kind = EquilibriumKind::kPure;

  const MixedStrategy& strategy(Player p) const {
    return p == Player::A ? strat_a : strat_b;
  }
};

struct EquilibriumOptions {
  // Include the fully mixed equilibrium when it exists. It is kept regardless
  // when the game has no pure equilibrium.
  bool include_mixed = true;
};

struct Equilibria {
  Game game;
  // Pure profiles first in row-major order, then the mixed profile.
  std::vector<EquilibriumProfile> profiles;
  // Set when some player has a payoff tie, so equilibria may form
  // continua; `profiles` then holds representative vertices.
  bool degenerate = false;
};

Equilibria enumerate_equilibria(const Game& game, EquilibriumOptions opts = {});

// Expected payoff to `p` under the profile.
double expected_payoff(const Game& game, Player p, const MixedStrategy& sa,
                       const MixedStrategy& sb);

// Largest gain any player obtains by a unilateral deviation. Exact because
// the best deviation from a mixed profile is always a pure action.
double max_deviation_gain(const Game& game, const EquilibriumProfile& profile);

struct JointAction {
  int a = 0;
  int b = 0;
  bool operator==(const JointAction&) const = default;
};

class JointHistory {
 public:
  explicit JointHistory(Game game,
                        std::size_t horizon = std::numeric_limits<std::size_t>::max());

  void push(JointAction action);
  void push(int a, int b) { push(JointAction{a, b}); }

  const Game& game() const { return game_; }
  const std::vector<JointAction>& rounds() const { return rounds_; }
  std::size_t size() const { return rounds_.size(); }
  bool empty() const { return rounds_.empty(); }
  std::size_t horizon() const { return horizon_; }
  const JointAction& operator[](std::size_t i) const { return rounds_[i]; }

  // Action taken by `p` in round `i` (0-based).
  int action(Player p, std::size_t i) const {
    return p == Player::A ? rounds_[i].a : rounds_[i].b;
  }

  // History of the first `t` rounds.
  JointHistory prefix(std::size_t t) const;

 private:
  Game game_;
  std::vector<JointAction> rounds_;
  std::size_t horizon_;
};

// Empirical frequency of each action of `p` over the first `t` rounds
// (all rounds when t is omitted).
MixedStrategy empirical_mixed_strategy(const JointHistory& history, Player p);
MixedStrategy empirical_mixed_strategy(const JointHistory& history, Player p,
                                       std::size_t t);

// Euclidean norm of the concatenated deviation (mu_a - s_a, mu_b - s_b).
template <typename DA, typename DB>
double joint_distance(const Eigen::MatrixBase<DA>& mu_a,
                      const Eigen::MatrixBase<DB>& mu_b,
                      const EquilibriumProfile& eq) {
  return std::sqrt((mu_a - eq.strat_a).squaredNorm() +
                   (mu_b - eq.strat_b).squaredNorm());
}

struct NashDistance {
  double value = 0.0;
  // Index into Equilibria::profiles of the closest profile (first on ties).
  std::size_t nearest = 0;
};

template <typename DA, typename DB>
NashDistance nash_distance(const Eigen::MatrixBase<DA>& mu_a,
                           const Eigen::MatrixBase<DB>& mu_b,
                           const Equilibria& eqs) {
  if (eqs.profiles.empty()) throw GameError("nash_distance: empty equilibrium set");
  NashDistance best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < eqs.profiles.size(); ++i) {
    const double d = joint_distance(mu_a, mu_b, eqs.profiles[i]);
    if (d < best.value) best = {d, i};
  }
  return best;
}

double nash_distance(const JointHistory& history, const Equilibria& eqs);

// Element t-1 is the distance over the first t rounds.
std::vector<double> nash_distance_series(const JointHistory& history,
                                         const Equilibria& eqs);

// Incremental form used by the match loop: feed rounds one at a time.
class NashDistanceTracker {
 public:
  explicit NashDistanceTracker(const Equilibria& eqs) : eqs_(&eqs) {}
  double add(JointAction round);
  std::size_t rounds() const { return t_; }

 private:
  const Equilibria* eqs_;
  std::array<std::size_t, 2> count_a_{0, 0};
  std::array<std::size_t, 2> count_b_{0, 0};
  std::size_t t_ = 0;
};

}  // namespace equilens

#endif  // EQUILENS_GAME_HPP_
