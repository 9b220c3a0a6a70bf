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

#include "equilens/match.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace equilens {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json optional_text(const std::optional<std::string>& s) {
  return s ? ordered_json(*s) : ordered_json(nullptr);
}

std::optional<std::string> read_optional_text(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::string>();
}

ordered_json number_or_null(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

bool valid_id(std::string_view id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

struct Abort {
  Diagnostic diagnostic;
};

// Asks one agent for its action, with one strict retry on unparseable text.
int request_action(Agent& agent, DecisionContext ctx, Rng& rng, const PromptTemplate& tpl,
                   std::optional<std::string>& reasoning, std::vector<Diagnostic>& diags) {
  const auto& labels = ctx.game->actions(ctx.role);
  const std::string role = to_string(ctx.role);
  for (int attempt = 0; attempt < 2; ++attempt) {
    AgentReply reply;
    try {
      reply = agent.next_action(ctx, rng);
    } catch (const AgentError& e) {
      throw Abort{{to_string(e.code()), e.what(), ctx.round, role}};
    } catch (const std::exception& e) {
      throw Abort{{"agent_failure", e.what(), ctx.round, role}};
    }
    std::optional<int> action = reply.action;
    if (action && (*action < 0 || *action > 1)) {
      throw Abort{{"invalid_action", "action index out of range", ctx.round, role}};
    }
    if (!action) action = parse_action(reply.text, labels);
    if (action) {
      reasoning = reply.reasoning;
      return *action;
    }
    if (attempt == 0) {
      diags.push_back({"retry", "unparseable action: " + reply.text, ctx.round, role});
      ctx.retry = true;
      ctx.prompt += "\n\n" + render_strict_prompt(tpl, *ctx.game, ctx.role);
    } else {
      throw Abort{{"unparseable_action", "unparseable action after retry: " + reply.text,
                   ctx.round, role}};
    }
  }
  return 0;
}

ordered_json diagnostic_to_json(const Diagnostic& d) {
  ordered_json j;
  j["code"] = d.code;
  j["message"] = d.message;
  j["round"] = d.round;
  j["role"] = d.role;
  return j;
}

}  // namespace

void MatchConfig::validate() const {
  if (rounds < 1) throw MatchError("match: rounds must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw MatchError("match: temperature must be >= 0");
  }
}

MatchRecord run_match(Agent& agent_a, Agent& agent_b, const MatchConfig& config,
                      const PromptTemplate& tpl, std::string cell_id) {
  config.validate();
  MatchRecord rec;
  rec.cell_id = std::move(cell_id);
  rec.config = config;
  rec.template_version = tpl.version();
  rec.descriptor_a = agent_a.descriptor();
  rec.descriptor_b = agent_b.descriptor();
  rec.history = JointHistory(config.game, config.rounds);

  const Equilibria eqs = enumerate_equilibria(config.game, {config.include_mixed});
  NashDistanceTracker tracker(eqs);
  Rng rng_a(derive_seed(config.seed, "agent:A"));
  Rng rng_b(derive_seed(config.seed, "agent:B"));
  agent_a.reset();
  agent_b.reset();

  const std::vector<RoundReasoning> no_reasoning;
  try {
    for (std::size_t round = 1; round <= config.rounds; ++round) {
      const std::span<const RoundReasoning> visible =
          config.mode == Mode::kCot ? std::span<const RoundReasoning>(rec.reasoning_log)
                                    : std::span<const RoundReasoning>(no_reasoning);
      std::array<int, 2> actions{};
      RoundReasoning reasoning;
      for (Player role : {Player::A, Player::B}) {
        DecisionContext ctx;
        ctx.game = &config.game;
        ctx.history = &rec.history;
        ctx.reasoning = visible;
        ctx.role = role;
        ctx.mode = config.mode;
        ctx.round = round;
        ctx.temperature = config.temperature;
        Agent& agent = role == Player::A ? agent_a : agent_b;
        if (agent.uses_prompt()) {
          ctx.prompt =
              render_prompt(tpl, config.game, rec.history, visible, role, config.mode, round);
        }
        Rng& rng = role == Player::A ? rng_a : rng_b;
        auto& text = role == Player::A ? reasoning.a : reasoning.b;
        actions[role == Player::A ? 0 : 1] =
            request_action(agent, std::move(ctx), rng, tpl, text, rec.diagnostics);
      }
      const JointAction joint{actions[0], actions[1]};
      rec.history.push(joint);
      rec.reasoning_log.push_back(std::move(reasoning));
      rec.distance_series.push_back(tracker.add(joint));
    }
  } catch (const Abort& a) {
    rec.valid = false;
    rec.diagnostics.push_back(a.diagnostic);
  }
  if (!rec.distance_series.empty()) rec.final_distance = rec.distance_series.back();
  agent_a.reset();
  agent_b.reset();
  return rec;
}

std::string to_jsonl(const MatchRecord& rec) {
  const MatchConfig& c = rec.config;
  ordered_json h;
  h["type"] = "header";
  h["format"] = "equilens-match/1";
  h["cell_id"] = rec.cell_id;
  h["game"] = game_to_json(c.game);
  h["rounds"] = c.rounds;
  h["mode"] = to_string(c.mode);
  h["seed"] = c.seed;
  h["temperature"] = c.temperature;
  h["agent_a"] = c.agent_a;
  h["agent_b"] = c.agent_b;
  h["include_mixed"] = c.include_mixed;
  h["template_version"] = rec.template_version;
  h["descriptor_a"] = rec.descriptor_a;
  h["descriptor_b"] = rec.descriptor_b;
  h["valid"] = rec.valid;
  h["rounds_played"] = rec.history.size();
  h["final_distance"] = number_or_null(rec.final_distance);
  h["diagnostics"] = ordered_json::array();
  for (const auto& d : rec.diagnostics) h["diagnostics"].push_back(diagnostic_to_json(d));

  std::string out = h.dump() + "\n";
  for (std::size_t i = 0; i < rec.history.size(); ++i) {
    ordered_json r;
    r["type"] = "round";
    r["round"] = i + 1;
    r["a"] = c.game.actions_a[static_cast<std::size_t>(rec.history[i].a)];
    r["b"] = c.game.actions_b[static_cast<std::size_t>(rec.history[i].b)];
    r["reasoning_a"] = optional_text(rec.reasoning_log[i].a);
    r["reasoning_b"] = optional_text(rec.reasoning_log[i].b);
    r["distance"] = rec.distance_series[i];
    out += r.dump() + "\n";
  }
  return out;
}

MatchRecord match_record_from_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  MatchRecord rec;
  std::size_t lineno = 0;
  try {
    if (!std::getline(in, line)) throw MatchError("record: empty");
    ++lineno;
    const json h = json::parse(line);
    if (h.at("type") != "header" || h.at("format") != "equilens-match/1") {
      throw MatchError("record: line 1 is not an equilens-match/1 header");
    }
    MatchConfig& c = rec.config;
    c.game = game_from_json(h.at("game"));
    c.rounds = h.at("rounds").get<std::size_t>();
    c.mode = mode_from_string(h.at("mode").get<std::string>());
    c.seed = h.at("seed").get<std::uint64_t>();
    c.temperature = h.at("temperature").get<double>();
    c.agent_a = h.at("agent_a").get<std::string>();
    c.agent_b = h.at("agent_b").get<std::string>();
    c.include_mixed = h.at("include_mixed").get<bool>();
    rec.cell_id = h.at("cell_id").get<std::string>();
    rec.template_version = h.at("template_version").get<std::string>();
    rec.descriptor_a = h.at("descriptor_a");
    rec.descriptor_b = h.at("descriptor_b");
    rec.valid = h.at("valid").get<bool>();
    const auto& fd = h.at("final_distance");
    rec.final_distance = fd.is_null() ? std::numeric_limits<double>::quiet_NaN() : fd.get<double>();
    for (const auto& d : h.at("diagnostics")) {
      rec.diagnostics.push_back({d.at("code").get<std::string>(), d.at("message").get<std::string>(),
                                 d.at("round").get<std::size_t>(), d.at("role").get<std::string>()});
    }
    rec.history = JointHistory(c.game, c.rounds);
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json r = json::parse(line);
      if (r.at("type") != "round" || r.at("round").get<std::size_t>() != rec.history.size() + 1) {
        throw MatchError("record: line " + std::to_string(lineno) + " is out of sequence");
      }
      const auto a = c.game.action_index(Player::A, r.at("a").get<std::string>());
      const auto b = c.game.action_index(Player::B, r.at("b").get<std::string>());
      if (!a || !b) throw MatchError("record: line " + std::to_string(lineno) + " has unknown actions");
      rec.history.push(*a, *b);
      rec.reasoning_log.push_back(
          {read_optional_text(r.at("reasoning_a")), read_optional_text(r.at("reasoning_b"))});
      rec.distance_series.push_back(r.at("distance").get<double>());
    }
    if (h.at("rounds_played").get<std::size_t>() != rec.history.size()) {
      throw MatchError("record: round count does not match header");
    }
  } catch (const json::exception& e) {
    throw MatchError("record: line " + std::to_string(lineno) + ": " + e.what());
  }
  return rec;
}

void write_match_record(const MatchRecord& record, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MatchError("cannot write " + path.string());
  out << to_jsonl(record);
  if (!out) throw MatchError("write failed: " + path.string());
}

MatchRecord read_match_record(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MatchError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return match_record_from_jsonl(ss.str());
  } catch (const MatchError& e) {
    throw MatchError(path.string() + ": " + e.what());
  }
}

const char* to_string(Pairing p) {
  return p == Pairing::kSelfPlay ? "self_play" : "all_ordered_pairs";
}

Pairing pairing_from_string(std::string_view s) {
  if (s == "self_play") return Pairing::kSelfPlay;
  if (s == "all_ordered_pairs") return Pairing::kAllOrderedPairs;
  throw MatchError("unknown pairing '" + std::string(s) + "'");
}

void TournamentPlan::validate() const {
  if (agents.empty()) throw MatchError("tournament: no agents");
  if (games.empty()) throw MatchError("tournament: no games");
  if (modes.empty()) throw MatchError("tournament: no modes");
  if (rounds < 1) throw MatchError("tournament: rounds must be >= 1");
  if (!(temperature >= 0.0)) throw MatchError("tournament: temperature must be >= 0");
  std::set<std::string> ids;
  for (const auto& a : agents) {
    if (!valid_id(a.id)) throw MatchError("tournament: invalid agent id '" + a.id + "'");
    if (!ids.insert(a.id).second) throw MatchError("tournament: duplicate agent id '" + a.id + "'");
  }
  std::set<std::string> names;
  for (const auto& g : games) {
    if (!valid_id(g.name)) throw MatchError("tournament: invalid game name '" + g.name + "'");
    if (!names.insert(g.name).second) throw MatchError("tournament: duplicate game '" + g.name + "'");
  }
  std::set<Mode> seen;
  for (Mode m : modes) {
    if (!seen.insert(m).second) throw MatchError("tournament: duplicate mode");
  }
  if (pairing == Pairing::kAllOrderedPairs && agents.size() < 2) {
    throw MatchError("tournament: all_ordered_pairs needs at least two agents");
  }
}

std::string cell_id(const Game& game, Mode mode, std::string_view a, std::string_view b) {
  return game.name + "." + to_string(mode) + "." + std::string(a) + "." + std::string(b);
}

std::uint64_t cell_seed(std::uint64_t base_seed, std::string_view id) {
  return base_seed ^ fnv1a64(id);
}

std::vector<CellSpec> plan_cells(const TournamentPlan& plan) {
  plan.validate();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < plan.agents.size(); ++i) {
    if (plan.pairing == Pairing::kSelfPlay) {
      pairs.emplace_back(i, i);
      continue;
    }
    for (std::size_t j = 0; j < plan.agents.size(); ++j) {
      if (i != j) pairs.emplace_back(i, j);
    }
  }
  std::vector<CellSpec> cells;
  for (const auto& g : plan.games) {
    for (Mode m : plan.modes) {
      for (const auto& [i, j] : pairs) {
        CellSpec c;
        c.id = cell_id(g, m, plan.agents[i].id, plan.agents[j].id);
        c.agent_a = i;
        c.agent_b = j;
        c.game = g;
        c.mode = m;
        c.seed = cell_seed(plan.base_seed, c.id);
        cells.push_back(std::move(c));
      }
    }
  }
  return cells;
}

namespace {

MatchRecord run_cell(const TournamentPlan& plan, const CellSpec& cell, const AgentFactory& factory,
                     const PromptTemplate& tpl) {
  MatchConfig cfg;
  cfg.game = cell.game;
  cfg.rounds = plan.rounds;
  cfg.mode = cell.mode;
  cfg.seed = cell.seed;
  cfg.temperature = plan.temperature;
  cfg.agent_a = plan.agents[cell.agent_a].id;
  cfg.agent_b = plan.agents[cell.agent_b].id;
  cfg.include_mixed = plan.include_mixed;
  std::unique_ptr<Agent> a;
  std::unique_ptr<Agent> b;
  try {
    a = factory(plan.agents[cell.agent_a]);
    b = factory(plan.agents[cell.agent_b]);
  } catch (const std::exception& e) {
    MatchRecord rec;
    rec.cell_id = cell.id;
    rec.config = cfg;
    rec.template_version = tpl.version();
    rec.history = JointHistory(cfg.game, cfg.rounds);
    rec.valid = false;
    rec.diagnostics.push_back({"agent_setup", e.what(), 0, ""});
    return rec;
  }
  return run_match(*a, *b, cfg, tpl, cell.id);
}

}  // namespace

std::vector<MatchRecord> run_tournament(const TournamentPlan& plan, const AgentFactory& factory,
                                        const PromptTemplate& tpl, unsigned jobs,
                                        const RecordSink& sink) {
  const std::vector<CellSpec> cells = plan_cells(plan);
  std::vector<std::optional<MatchRecord>> slots(cells.size());
  std::vector<MatchRecord> out;
  out.reserve(cells.size());
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cells.size())));

  if (jobs == 1) {
    for (const auto& cell : cells) {
      out.push_back(run_cell(plan, cell, factory, tpl));
      if (sink) sink(out.back());
    }
    return out;
  }

  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        MatchRecord rec = run_cell(plan, cells[i], factory, tpl);
        {
          std::lock_guard lock(mu);
          slots[i] = std::move(rec);
        }
        cv.notify_all();
      }
    });
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return slots[i].has_value(); });
    out.push_back(std::move(*slots[i]));
    slots[i].reset();
    lock.unlock();
    if (sink) sink(out.back());
  }
  return out;
}

}  // namespace equilens
