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

#include "equilens/game.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace equilens {
namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

Game symmetric_game(std::string name, ActionLabels labels, double both0,
                    double a0b1_to_a, double a0b1_to_b, double both1) {
  // (0,0) -> (both0, both0); (0,1) -> (a0b1_to_a, a0b1_to_b);
  // (1,0) mirrors (0,1); (1,1) -> (both1, both1).
  Game g;
  g.name = std::move(name);
  g.actions_a = labels;
  g.actions_b = labels;
  g.payoff_a << both0, a0b1_to_a, a0b1_to_b, both1;
  g.payoff_b << both0, a0b1_to_b, a0b1_to_a, both1;
  return g;
}

void validate(const Game& g) {
  if (!g.payoff_a.allFinite() || !g.payoff_b.allFinite()) {
    throw GameError("game '" + g.name + "': payoffs must be finite");
  }
  for (const auto* labels : {&g.actions_a, &g.actions_b}) {
    if ((*labels)[0].empty() || (*labels)[1].empty() ||
        iequals((*labels)[0], (*labels)[1])) {
      throw GameError("game '" + g.name + "': action labels must be distinct and non-empty");
    }
  }
}

}  // namespace

std::optional<int> Game::action_index(Player p, std::string_view label) const {
  const auto& labels = actions(p);
  for (int i = 0; i < 2; ++i) {
    if (iequals(labels[static_cast<std::size_t>(i)], label)) return i;
  }
  return std::nullopt;
}

bool Game::operator==(const Game& other) const {
  return name == other.name && actions_a == other.actions_a &&
         actions_b == other.actions_b && payoff_a == other.payoff_a &&
         payoff_b == other.payoff_b;
}

std::vector<std::string> canonical_game_names() { return {"pd", "bos", "sh", "mp"}; }

Game make_game(std::string_view name) {
  if (name == "pd") {
    return symmetric_game("pd", {"Cooperate", "Defect"}, 3, 0, 5, 1);
  }
  if (name == "sh") {
    return symmetric_game("sh", {"Stag", "Hare"}, 4, 0, 3, 3);
  }
  if (name == "bos") {
    Game g;
    g.name = "bos";
    g.actions_a = {"Opera", "Football"};
    g.actions_b = {"Opera", "Football"};
    g.payoff_a << 2, 0, 0, 1;
    g.payoff_b << 1, 0, 0, 2;
    return g;
  }
  if (name == "mp") {
    // Player A wins on a match, player B on a mismatch.
    Game g;
    g.name = "mp";
    g.actions_a = {"Heads", "Tails"};
    g.actions_b = {"Heads", "Tails"};
    g.payoff_a << 1, -1, -1, 1;
    g.payoff_b = -g.payoff_a;
    return g;
  }
  throw GameError("unknown game '" + std::string(name) + "' (expected pd, bos, sh or mp)");
}

Game make_custom_game(std::string name, ActionLabels actions_a, ActionLabels actions_b,
                      const std::vector<std::vector<std::array<double, 2>>>& payoffs) {
  if (payoffs.size() != 2 || payoffs[0].size() != 2 || payoffs[1].size() != 2) {
    throw GameError("game '" + name + "': payoff table must be 2x2");
  }
  Game g;
  g.name = std::move(name);
  g.actions_a = std::move(actions_a);
  g.actions_b = std::move(actions_b);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      g.payoff_a(i, j) = payoffs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][0];
      g.payoff_b(i, j) = payoffs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][1];
    }
  }
  validate(g);
  return g;
}

Game game_from_json(const nlohmann::json& j) {
  if (j.is_string()) return make_game(j.get<std::string>());
  if (!j.is_object()) throw GameError("game definition must be an object or a name");
  auto labels = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 2) {
      throw GameError(std::string("game: '") + key + "' must list exactly 2 actions");
    }
    ActionLabels out;
    for (std::size_t i = 0; i < 2; ++i) {
      if (!j.at(key)[i].is_string()) throw GameError(std::string("game: '") + key + "' entries must be strings");
      out[i] = j.at(key)[i].get<std::string>();
    }
    return out;
  };
  if (!j.contains("name") || !j.at("name").is_string()) {
    throw GameError("game: 'name' must be a string");
  }
  const auto& p = j.contains("payoffs") ? j.at("payoffs") : nlohmann::json();
  std::vector<std::vector<std::array<double, 2>>> table;
  if (!p.is_array()) throw GameError("game: 'payoffs' must be a 2x2 table of [pa, pb] pairs");
  for (const auto& row : p) {
    if (!row.is_array()) throw GameError("game: payoff rows must be arrays");
    auto& out_row = table.emplace_back();
    for (const auto& cell : row) {
      if (!cell.is_array() || cell.size() != 2 || !cell[0].is_number() || !cell[1].is_number()) {
        throw GameError("game: payoff cells must be [pa, pb] number pairs");
      }
      out_row.push_back({cell[0].get<double>(), cell[1].get<double>()});
    }
  }
  return make_custom_game(j.at("name").get<std::string>(), labels("actions_a"),
                          labels("actions_b"), table);
}

nlohmann::ordered_json game_to_json(const Game& game) {
  nlohmann::ordered_json j;
  j["name"] = game.name;
  j["actions_a"] = game.actions_a;
  j["actions_b"] = game.actions_b;
  auto payoffs = nlohmann::ordered_json::array();
  for (int i = 0; i < 2; ++i) {
    auto row = nlohmann::ordered_json::array();
    for (int k = 0; k < 2; ++k) {
      row.push_back({game.payoff_a(i, k), game.payoff_b(i, k)});
    }
    payoffs.push_back(row);
  }
  j["payoffs"] = payoffs;
  return j;
}

bool is_mixed_strategy(const MixedStrategy& s, double tol) {
  return (s.array() >= -tol).all() && (s.array() <= 1.0 + tol).all() &&
         std::abs(s.sum() - 1.0) <= tol;
}

MixedStrategy pure_strategy(int action) {
  MixedStrategy s = MixedStrategy::Zero();
  s(action) = 1.0;
  return s;
}

double expected_payoff(const Game& game, Player p, const MixedStrategy& sa,
                       const MixedStrategy& sb) {
  return sa.dot(game.payoff(p) * sb);
}

double max_deviation_gain(const Game& game, const EquilibriumProfile& profile) {
  const auto& sa = profile.strat_a;
  const auto& sb = profile.strat_b;
  const Eigen::Vector2d a_values = game.payoff_a * sb;
  const Eigen::Vector2d b_values = game.payoff_b.transpose() * sa;
  const double gain_a = a_values.maxCoeff() - sa.dot(a_values);
  const double gain_b = b_values.maxCoeff() - sb.dot(b_values);
  return std::max(gain_a, gain_b);
}

Equilibria enumerate_equilibria(const Game& game, EquilibriumOptions opts) {
  const auto& A = game.payoff_a;
  const auto& B = game.payoff_b;
  Equilibria out{game, {}, false};

  for (int j = 0; j < 2; ++j) {
    if (A(0, j) == A(1, j)) out.degenerate = true;
  }
  for (int i = 0; i < 2; ++i) {
    if (B(i, 0) == B(i, 1)) out.degenerate = true;
  }

  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const bool a_best = A(i, j) >= A(1 - i, j);
      const bool b_best = B(i, j) >= B(i, 1 - j);
      if (a_best && b_best) {
        out.profiles.push_back({pure_strategy(i), pure_strategy(j), EquilibriumKind::kPure});
      }
    }
  }

  // The mixed profile is kept when no pure one exists.
  if (opts.include_mixed || out.profiles.empty()) {
    // q: probability B plays action 0 that leaves A indifferent;
    // p: probability A plays action 0 that leaves B indifferent.
    const double den_q = (A(0, 0) - A(1, 0)) - (A(0, 1) - A(1, 1));
    const double den_p = (B(0, 0) - B(0, 1)) - (B(1, 0) - B(1, 1));
    if (den_q != 0.0 && den_p != 0.0) {
      const double q = (A(1, 1) - A(0, 1)) / den_q;
      const double p = (B(1, 1) - B(1, 0)) / den_p;
      if (p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        out.profiles.push_back({MixedStrategy(p, 1.0 - p), MixedStrategy(q, 1.0 - q),
                                EquilibriumKind::kMixed});
      }
    }
  }
  return out;
}

JointHistory::JointHistory(Game game, std::size_t horizon)
    : game_(std::move(game)), horizon_(horizon) {}

void JointHistory::push(JointAction action) {
  if (action.a < 0 || action.a > 1 || action.b < 0 || action.b > 1) {
    throw GameError("history: action index out of range");
  }
  if (rounds_.size() >= horizon_) throw GameError("history: horizon exceeded");
  rounds_.push_back(action);
}

JointHistory JointHistory::prefix(std::size_t t) const {
  JointHistory out(game_, horizon_);
  out.rounds_.assign(rounds_.begin(),
                     rounds_.begin() + static_cast<std::ptrdiff_t>(std::min(t, rounds_.size())));
  return out;
}

MixedStrategy empirical_mixed_strategy(const JointHistory& history, Player p) {
  return empirical_mixed_strategy(history, p, history.size());
}

MixedStrategy empirical_mixed_strategy(const JointHistory& history, Player p,
                                       std::size_t t) {
  if (t == 0 || history.empty()) throw GameError("empirical strategy of an empty history");
  if (t > history.size()) throw GameError("empirical strategy: prefix longer than history");
  std::size_t count0 = 0;
  for (std::size_t i = 0; i < t; ++i) {
    if (history.action(p, i) == 0) ++count0;
  }
  const double n = static_cast<double>(t);
  return {static_cast<double>(count0) / n, static_cast<double>(t - count0) / n};
}

double nash_distance(const JointHistory& history, const Equilibria& eqs) {
  if (!(history.game() == eqs.game)) {
    throw GameError("nash_distance: history and equilibria refer to different games");
  }
  return nash_distance(empirical_mixed_strategy(history, Player::A),
                       empirical_mixed_strategy(history, Player::B), eqs)
      .value;
}

std::vector<double> nash_distance_series(const JointHistory& history,
                                         const Equilibria& eqs) {
  if (!(history.game() == eqs.game)) {
    throw GameError("nash_distance_series: history and equilibria refer to different games");
  }
  if (history.empty()) throw GameError("nash_distance_series: empty history");
  NashDistanceTracker tracker(eqs);
  std::vector<double> out;
  out.reserve(history.size());
  for (const auto& r : history.rounds()) out.push_back(tracker.add(r));
  return out;
}

double NashDistanceTracker::add(JointAction round) {
  ++count_a_[static_cast<std::size_t>(round.a)];
  ++count_b_[static_cast<std::size_t>(round.b)];
  ++t_;
  const double n = static_cast<double>(t_);
  const MixedStrategy mu_a(static_cast<double>(count_a_[0]) / n,
                           static_cast<double>(count_a_[1]) / n);
  const MixedStrategy mu_b(static_cast<double>(count_b_[0]) / n,
                           static_cast<double>(count_b_[1]) / n);
  return nash_distance(mu_a, mu_b, *eqs_).value;
}

}  // namespace equilens
