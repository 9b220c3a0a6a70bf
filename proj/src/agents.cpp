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

#include <array>

#include "equilens/agent.hpp"

namespace equilens {

const char* to_string(AgentErrorCode c) {
  switch (c) {
    case AgentErrorCode::kTimeout:
      return "timeout";
    case AgentErrorCode::kMalformedResponse:
      return "malformed_response";
    case AgentErrorCode::kSchemaError:
      return "schema_error";
    case AgentErrorCode::kDeadEndpoint:
      return "dead_endpoint";
    case AgentErrorCode::kBackendError:
      return "backend_error";
    case AgentErrorCode::kContextOverflow:
      return "context_overflow";
  }
  return "backend_error";
}

namespace {

constexpr std::array<std::pair<ScriptedKind, const char*>, 7> kKindNames{{
    {ScriptedKind::kAlwaysCoop, "always_coop"},
    {ScriptedKind::kAlwaysDefect, "always_defect"},
    {ScriptedKind::kTitForTat, "tit_for_tat"},
    {ScriptedKind::kGrimTrigger, "grim_trigger"},
    {ScriptedKind::kBernoulli, "bernoulli"},
    {ScriptedKind::kNashMixed, "nash_mixed"},
    {ScriptedKind::kFictitiousPlay, "fictitious_play"},
}};

int sample(const MixedStrategy& s, Rng& rng) { return rng.uniform() < s(0) ? 0 : 1; }

int fictitious_play(const JointHistory& h, Player role) {
  const Player opp = other(role);
  std::array<double, 2> counts{0.0, 0.0};
  for (std::size_t i = 0; i < h.size(); ++i) counts[static_cast<std::size_t>(h.action(opp, i))] += 1;
  if (h.empty()) counts = {1.0, 1.0};
  const Eigen::Matrix2d& u = h.game().payoff(role);
  std::array<double, 2> value{};
  for (int mine = 0; mine < 2; ++mine) {
    for (int theirs = 0; theirs < 2; ++theirs) {
      const double pay = role == Player::A ? u(mine, theirs) : u(theirs, mine);
      value[static_cast<std::size_t>(mine)] += pay * counts[static_cast<std::size_t>(theirs)];
    }
  }
  return value[1] > value[0] ? 1 : 0;
}

}  // namespace

const char* to_string(ScriptedKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "always_coop";
}

std::optional<ScriptedKind> scripted_kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kKindNames) {
    if (s == name) return kind;
  }
  return std::nullopt;
}

EquilibriumProfile default_nash_profile(const Game& game) {
  const Equilibria eqs = enumerate_equilibria(game);
  for (const auto& p : eqs.profiles) {
    if (p.kind == EquilibriumKind::kMixed) return p;
  }
  return eqs.profiles.front();
}

int scripted_next_action(const ScriptedStrategy& strategy, const JointHistory& visible,
                         Player role, Rng& rng) {
  const Player opp = other(role);
  switch (strategy.kind) {
    case ScriptedKind::kAlwaysCoop:
      return 0;
    case ScriptedKind::kAlwaysDefect:
      return 1;
    case ScriptedKind::kTitForTat:
      return visible.empty() ? 0 : visible.action(opp, visible.size() - 1);
    case ScriptedKind::kGrimTrigger:
      for (std::size_t i = 0; i < visible.size(); ++i) {
        if (visible.action(opp, i) == 1) return 1;
      }
      return 0;
    case ScriptedKind::kBernoulli:
      return rng.uniform() < strategy.p ? 0 : 1;
    case ScriptedKind::kNashMixed: {
      const EquilibriumProfile profile =
          strategy.profile ? *strategy.profile : default_nash_profile(visible.game());
      return sample(profile.strategy(role), rng);
    }
    case ScriptedKind::kFictitiousPlay:
      return fictitious_play(visible, role);
  }
  return 0;
}

ScriptedAgent::ScriptedAgent(ScriptedStrategy strategy) : strategy_(std::move(strategy)) {
  if (strategy_.kind == ScriptedKind::kBernoulli && !(strategy_.p >= 0.0 && strategy_.p <= 1.0)) {
    throw std::invalid_argument("bernoulli: p must lie in [0, 1]");
  }
  if (strategy_.profile && (!is_mixed_strategy(strategy_.profile->strat_a) ||
                            !is_mixed_strategy(strategy_.profile->strat_b))) {
    throw std::invalid_argument("nash_mixed: profile is not a pair of mixed strategies");
  }
}

AgentReply ScriptedAgent::next_action(const DecisionContext& ctx, Rng& rng) {
  AgentReply r;
  r.action = scripted_next_action(strategy_, *ctx.history, ctx.role, rng);
  r.text = ctx.game->actions(ctx.role)[static_cast<std::size_t>(*r.action)];
  return r;
}

nlohmann::ordered_json ScriptedAgent::descriptor() const {
  nlohmann::ordered_json j;
  j["kind"] = to_string(strategy_.kind);
  if (strategy_.kind == ScriptedKind::kBernoulli) j["p"] = strategy_.p;
  if (strategy_.kind == ScriptedKind::kNashMixed && strategy_.profile) {
    j["strat_a"] = {strategy_.profile->strat_a(0), strategy_.profile->strat_a(1)};
    j["strat_b"] = {strategy_.profile->strat_b(0), strategy_.profile->strat_b(1)};
  }
  return j;
}

}  // namespace equilens
