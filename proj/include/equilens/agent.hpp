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

#ifndef EQUILENS_AGENT_HPP_
#define EQUILENS_AGENT_HPP_

// Agent interface and scripted strategies.

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "equilens/game.hpp"
#include "equilens/prompt.hpp"
#include "equilens/rng.hpp"
#include "json.hpp"

namespace equilens {

enum class AgentErrorCode {
  kTimeout,
  kMalformedResponse,
  kSchemaError,
  kDeadEndpoint,
  kBackendError,
  kContextOverflow,
};

const char* to_string(AgentErrorCode c);

class AgentError : public std::runtime_error {
 public:
  AgentError(AgentErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  AgentErrorCode code() const { return code_; }

 private:
  AgentErrorCode code_;
};

// Everything an agent may see before choosing its action for `round`.
struct DecisionContext {
  const Game* game = nullptr;
  // Committed rounds only; never includes the current round.
  const JointHistory* history = nullptr;
  // Reasoning visible to this agent, one entry per committed round.
  std::span<const RoundReasoning> reasoning;
  Player role = Player::A;
  Mode mode = Mode::kDirect;
  std::size_t round = 1;
  std::string prompt;
  double temperature = 0.7;
  // Set on the single retry after an unparseable reply.
  bool retry = false;
};

struct AgentReply {
  // Agents that choose an index directly set this; text agents leave it
  // empty and the engine parses `text`.
  std::optional<int> action;
  std::string text;
  std::optional<std::string> reasoning;
};

class Agent {
 public:
  virtual ~Agent() = default;
  // All randomness must come from `rng`.
  virtual AgentReply next_action(const DecisionContext& ctx, Rng& rng) = 0;
  // Clears per-match state.
  virtual void reset() {}
  // False when the agent ignores DecisionContext::prompt; the engine then
  // skips rendering it.
  virtual bool uses_prompt() const { return true; }
  virtual nlohmann::ordered_json descriptor() const = 0;
};

enum class ScriptedKind {
  kAlwaysCoop,
  kAlwaysDefect,
  kTitForTat,
  kGrimTrigger,
  kBernoulli,
  kNashMixed,
  kFictitiousPlay,
};

const char* to_string(ScriptedKind k);
std::optional<ScriptedKind> scripted_kind_from_string(std::string_view s);

struct ScriptedStrategy {
  ScriptedKind kind = ScriptedKind::kAlwaysCoop;
  // Probability of action 0 for kBernoulli.
  double p = 0.5;
  // Profile sampled by kNashMixed. When empty, the game's mixed equilibrium
  // (or its first equilibrium if none is mixed) is used.
  std::optional<EquilibriumProfile> profile;
};

// Action index for `role` given the committed history. Only kBernoulli and
// kNashMixed draw from `rng`, one uniform per call.
int scripted_next_action(const ScriptedStrategy& strategy, const JointHistory& visible,
                         Player role, Rng& rng);

class ScriptedAgent : public Agent {
 public:
  explicit ScriptedAgent(ScriptedStrategy strategy);
  AgentReply next_action(const DecisionContext& ctx, Rng& rng) override;
  nlohmann::ordered_json descriptor() const override;
  bool uses_prompt() const override { return false; }
  const ScriptedStrategy& strategy() const { return strategy_; }

 private:
  ScriptedStrategy strategy_;
};

// Equilibrium a nash_mixed agent plays when none is stored.
EquilibriumProfile default_nash_profile(const Game& game);

}  // namespace equilens

#endif  // EQUILENS_AGENT_HPP_
