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

#ifndef EQUILENS_MATCH_HPP_
#define EQUILENS_MATCH_HPP_

// Repeated-game matches, tournaments and their JSON-lines records.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "equilens/agent.hpp"
#include "equilens/game.hpp"
#include "equilens/prompt.hpp"
#include "json.hpp"

namespace equilens {

class MatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MatchConfig {
  Game game = make_game("pd");
  std::size_t rounds = 50;
  Mode mode = Mode::kDirect;
  std::uint64_t seed = 0;
  double temperature = 0.7;
  // Agent ids for roles A and B.
  std::string agent_a = "A";
  std::string agent_b = "B";
  bool include_mixed = true;

  void validate() const;
};

struct Diagnostic {
  // "retry" is informational; every other code aborted the match.
  std::string code;
  std::string message;
  std::size_t round = 0;
  std::string role;

  bool operator==(const Diagnostic&) const = default;
};

struct MatchRecord {
  std::string cell_id;
  MatchConfig config;
  std::string template_version;
  nlohmann::ordered_json descriptor_a;
  nlohmann::ordered_json descriptor_b;
  JointHistory history{make_game("pd")};
  std::vector<RoundReasoning> reasoning_log;
  std::vector<double> distance_series;
  // NaN when no round was committed.
  double final_distance = std::numeric_limits<double>::quiet_NaN();
  bool valid = true;
  std::vector<Diagnostic> diagnostics;
};

// Plays config.rounds simultaneous rounds. Agent errors and unparseable
// actions (after one strict retry) end the match with valid = false.
MatchRecord run_match(Agent& agent_a, Agent& agent_b, const MatchConfig& config,
                      const PromptTemplate& tpl = PromptTemplate::builtin(),
                      std::string cell_id = "match");

// Header object on the first line, then one object per committed round.
std::string to_jsonl(const MatchRecord& record);
MatchRecord match_record_from_jsonl(std::string_view text);
void write_match_record(const MatchRecord& record, const std::filesystem::path& path);
MatchRecord read_match_record(const std::filesystem::path& path);

enum class Pairing { kSelfPlay, kAllOrderedPairs };

const char* to_string(Pairing p);
Pairing pairing_from_string(std::string_view s);

struct AgentSpec {
  // [A-Za-z0-9_.-]+, unique within a plan.
  std::string id;
  nlohmann::json params;
};

struct TournamentPlan {
  std::vector<AgentSpec> agents;
  std::vector<Game> games;
  std::vector<Mode> modes;
  Pairing pairing = Pairing::kAllOrderedPairs;
  std::size_t rounds = 50;
  std::uint64_t base_seed = 0;
  double temperature = 0.7;
  bool include_mixed = true;

  void validate() const;
};

struct CellSpec {
  std::string id;
  std::size_t agent_a = 0;
  std::size_t agent_b = 0;
  Game game;
  Mode mode = Mode::kDirect;
  std::uint64_t seed = 0;
};

// "<game>.<mode>.<agent_a>.<agent_b>"
std::string cell_id(const Game& game, Mode mode, std::string_view a, std::string_view b);
std::uint64_t cell_seed(std::uint64_t base_seed, std::string_view cell_id);

// Cells ordered by game, then mode, then pair.
std::vector<CellSpec> plan_cells(const TournamentPlan& plan);

// Returns a fresh agent for one role of one match.
using AgentFactory = std::function<std::unique_ptr<Agent>(const AgentSpec&)>;
using RecordSink = std::function<void(const MatchRecord&)>;

// Runs every cell on up to `jobs` workers. Records are returned, and passed
// to `sink` on the calling thread, in plan order. A cell whose agents cannot
// be created yields an invalid record.
std::vector<MatchRecord> run_tournament(const TournamentPlan& plan, const AgentFactory& factory,
                                        const PromptTemplate& tpl = PromptTemplate::builtin(),
                                        unsigned jobs = 1, const RecordSink& sink = {});

}  // namespace equilens

#endif  // EQUILENS_MATCH_HPP_
