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
#include "equilens/agent.hpp"
#include "equilens/circuit.hpp"
#include "equilens/match.hpp"
#include "equilens/prompt.hpp"
#include "equilens/tokenizer.hpp"
#include "equilens/transformer_agent.hpp"

using namespace equilens;

namespace {

int act(ScriptedKind k, const JointHistory& h, Player role = Player::A, std::uint64_t seed = 0) {
  Rng rng(seed);
  return scripted_next_action({k}, h, role, rng);
}

JointHistory opp_plays(const Game& g, std::initializer_list<int> moves, Player opp = Player::B) {
  JointHistory h(g);
  for (int m : moves) opp == Player::B ? h.push(0, m) : h.push(m, 0);
  return h;
}

// All-zero model whose logits at every position are W_U^T e0.
Model constant_logit_model(double l0, double l1) {
  const Tokenizer tok = Tokenizer::standard();
  ModelSpec spec = default_model_spec();
  Model m = Model::zeros(spec);
  m.token_embedding.col(0).setOnes();
  const auto ids = tok.action_token_ids(make_game("pd"), Player::A);
  m.unembedding(0, ids[0]) = l0;
  m.unembedding(0, ids[1]) = l1;
  return m;
}

}  // namespace

TEST_CASE("scripted strategies") {
  const Game pd = make_game("pd");
  JointHistory empty(pd);
  CHECK(act(ScriptedKind::kTitForTat, empty) == 0);
  CHECK(act(ScriptedKind::kGrimTrigger, empty) == 0);
  CHECK(act(ScriptedKind::kAlwaysCoop, empty) == 0);
  CHECK(act(ScriptedKind::kAlwaysDefect, empty) == 1);

  CHECK(act(ScriptedKind::kTitForTat, opp_plays(pd, {0, 1})) == 1);
  CHECK(act(ScriptedKind::kTitForTat, opp_plays(pd, {1, 0})) == 0);
  CHECK(act(ScriptedKind::kTitForTat, opp_plays(pd, {1}, Player::A), Player::B) == 1);

  CHECK(act(ScriptedKind::kGrimTrigger, opp_plays(pd, {0, 0})) == 0);
  CHECK(act(ScriptedKind::kGrimTrigger, opp_plays(pd, {1, 0, 0, 0, 0})) == 1);
  CHECK(act(ScriptedKind::kGrimTrigger, opp_plays(pd, {0, 0, 1, 0})) == 1);
}

TEST_CASE("fictitious play best-responds to the empirical mixture") {
  const Game mp = make_game("mp");
  // Opponent played (H,H,T). A wins on a match, so A answers Heads;
  // B wins on a mismatch, so B answers Tails.
  CHECK(act(ScriptedKind::kFictitiousPlay, opp_plays(mp, {0, 0, 1}, Player::B), Player::A) == 0);
  CHECK(act(ScriptedKind::kFictitiousPlay, opp_plays(mp, {0, 0, 1}, Player::A), Player::B) == 1);
  // Tie on an empty history and on a balanced history: lowest index.
  CHECK(act(ScriptedKind::kFictitiousPlay, JointHistory(mp), Player::B) == 0);
  CHECK(act(ScriptedKind::kFictitiousPlay, opp_plays(mp, {0, 1}, Player::A), Player::B) == 0);
  // In PD, Defect is dominant.
  CHECK(act(ScriptedKind::kFictitiousPlay, opp_plays(make_game("pd"), {0, 0, 0})) == 1);
}

TEST_CASE("randomized strategies draw only from the given rng") {
  const Game pd = make_game("pd");
  const JointHistory h(pd);
  ScriptedStrategy b{ScriptedKind::kBernoulli, 0.3};
  Rng r1(77), r2(77);
  int zeros = 0;
  for (int i = 0; i < 20000; ++i) {
    const int x = scripted_next_action(b, h, Player::A, r1);
    CHECK(x == scripted_next_action(b, h, Player::A, r2));
    zeros += x == 0;
  }
  CHECK(std::abs(zeros / 20000.0 - 0.3) < 0.02);

  ScriptedStrategy one{ScriptedKind::kBernoulli, 1.0};
  ScriptedStrategy none{ScriptedKind::kBernoulli, 0.0};
  Rng r(1);
  for (int i = 0; i < 100; ++i) {
    CHECK(scripted_next_action(one, h, Player::A, r) == 0);
    CHECK(scripted_next_action(none, h, Player::A, r) == 1);
  }
}

TEST_CASE("nash_mixed converges to its stored strategy") {
  const Game bos = make_game("bos");
  const EquilibriumProfile prof = default_nash_profile(bos);
  CHECK(prof.kind == EquilibriumKind::kMixed);
  for (Player p : {Player::A, Player::B}) {
    ScriptedStrategy s{ScriptedKind::kNashMixed};
    Rng rng(derive_seed(3, to_string(p)));
    const JointHistory h(bos);
    int zeros = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) zeros += scripted_next_action(s, h, p, rng) == 0;
    CHECK(std::abs(zeros / double(n) - prof.strategy(p)(0)) < 0.02);
  }
  // PD has no mixed equilibrium: the pure one is used.
  CHECK(default_nash_profile(make_game("pd")).strat_a == pure_strategy(1));
}

TEST_CASE("scripted kind names round-trip") {
  for (auto k : {ScriptedKind::kAlwaysCoop, ScriptedKind::kAlwaysDefect, ScriptedKind::kTitForTat,
                 ScriptedKind::kGrimTrigger, ScriptedKind::kBernoulli, ScriptedKind::kNashMixed,
                 ScriptedKind::kFictitiousPlay}) {
    CHECK(scripted_kind_from_string(to_string(k)) == k);
  }
  CHECK_FALSE(scripted_kind_from_string("random"));
}

TEST_CASE("prompt rendering") {
  const Game pd = make_game("pd");
  const PromptTemplate tpl = PromptTemplate::builtin();
  JointHistory h(pd);
  const std::vector<RoundReasoning> none;
  const std::string p1 = render_prompt(tpl, pd, h, none, Player::A, Mode::kDirect, 1);
  CHECK(p1.find("Cooperate") != std::string::npos);
  CHECK(p1.find("Defect") != std::string::npos);
  CHECK(p1.find("Agent A") != std::string::npos);
  CHECK(p1.find("History") == std::string::npos);
  CHECK(p1 == render_prompt(tpl, pd, h, none, Player::A, Mode::kDirect, 1));
  CHECK_THROWS_AS(render_prompt(tpl, pd, h, none, Player::A, Mode::kDirect, 2), PromptError);

  h.push(0, 1);
  const std::vector<RoundReasoning> log{{"I trust them.", "Secret plan to defect."}};
  const std::string cot = render_prompt(tpl, pd, h, log, Player::A, Mode::kCot, 2);
  const std::string scratch = render_prompt(tpl, pd, h, {}, Player::A, Mode::kScratchpad, 2);
  CHECK(cot.find("Secret plan to defect.") != std::string::npos);
  CHECK(scratch.find("Secret plan to defect.") == std::string::npos);
  CHECK(scratch.find("Round 1: Agent A played Cooperate, Agent B played Defect.") != std::string::npos);
  CHECK(scratch.find("scratchpad") != std::string::npos);
  const std::string direct = render_prompt(tpl, pd, h, {}, Player::B, Mode::kDirect, 2);
  CHECK(direct.find("Reply with the name of your action only.") != std::string::npos);
  CHECK(direct.find("Agent B in") != std::string::npos);
}

TEST_CASE("prompt templates") {
  CHECK_THROWS_AS(PromptTemplate::builtin("v9"), PromptError);
  CHECK_THROWS_AS(PromptTemplate::parse("t", "[[main]]\nhello\n"), PromptError);
  CHECK_THROWS_AS(fill_template("{{missing}}", {}), PromptError);
  CHECK(fill_template("a {{x}} b", {{"x", "1"}}) == "a 1 b");
  CHECK(PromptTemplate::builtin().version() == "v1");
}

TEST_CASE("action parsing") {
  const ActionLabels pd{"Cooperate", "Defect"};
  CHECK(parse_action("Defect", pd) == 1);
  CHECK(parse_action("  cooperate. ", pd) == 0);
  CHECK(parse_action("I could Cooperate, but final answer: DEFECT", pd) == 1);
  CHECK(parse_action("Defect? No. Cooperate.", pd) == 0);
  CHECK_FALSE(parse_action("Defection is tempting", pd));
  CHECK_FALSE(parse_action("", pd));
  CHECK_FALSE(parse_action("uncooperative", pd));
  const ActionLabels sh{"Stag", "Hare"};
  CHECK(parse_action("hare", sh) == 1);
}

TEST_CASE("tokenizer") {
  const Tokenizer tok = Tokenizer::standard();
  const Game pd = make_game("pd");
  JointHistory h(pd);
  h.push(0, 1);
  h.push(1, 1);
  const std::string t = transcript(pd, h, Player::B);
  CHECK(t == "<bos> game:pd my:Defect their:Cooperate my:Defect their:Defect");
  const auto ids = tok.encode(t);
  CHECK(tok.decode(ids) == t);
  CHECK(opponent_positions(tok, ids) == std::vector<int>{3, 5});
  CHECK(tok.classify(ids[2]).cls == TokenClass::kMine);
  CHECK(tok.classify(ids[2]).action == 1);
  CHECK(tok.classify(ids[3]).action == 0);
  CHECK_THROWS_AS(tok.encode("<bos> hello"), TokenizerError);
  CHECK(Tokenizer::from_json(tok.to_json()).vocab() == tok.vocab());
  const auto a = tok.action_token_ids(pd, Player::A);
  CHECK(tok.token(a[0]) == "Cooperate");
  CHECK(tok.token(a[1]) == "Defect");
  CHECK_THROWS_AS(tok.action_token_ids(make_custom_game("c", {"Up", "Down"}, {"L", "R"},
                                                       {{{{1, 1}}, {{0, 0}}}, {{{0, 0}}, {{1, 1}}}}),
                                      Player::A),
                  TokenizerError);
}

TEST_CASE("transformer action choice") {
  const Tokenizer tok = Tokenizer::standard();
  const auto ids = tok.action_token_ids(make_game("pd"), Player::A);
  Rng rng(4);

  const Model argmax = constant_logit_model(2.0, 1.0);
  const auto c0 = transformer_next_action(argmax, tok, "<bos> game:pd", ids, 0.0, rng);
  CHECK(c0.action == 0);
  CHECK(c0.probs(0) == 1.0);
  // Temperature 0 draws nothing.
  Rng fresh(4);
  CHECK(rng.next_u64() == fresh.next_u64());

  const Model tie = constant_logit_model(1.0, 1.0);
  CHECK(transformer_next_action(tie, tok, "<bos> game:pd", ids, 0.0, rng).action == 0);

  const Model defect = constant_logit_model(0.0, 1000.0);
  for (int i = 0; i < 200; ++i) {
    CHECK(transformer_next_action(defect, tok, "<bos> game:pd", ids, 0.7, rng).action == 1);
  }
  const auto soft = transformer_next_action(argmax, tok, "<bos> game:pd", ids, 1.0, rng);
  CHECK(soft.probs(0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("planted model without final correction keeps cooperating") {
  const Tokenizer tok = Tokenizer::standard();
  const Game pd = make_game("pd");
  const auto ids = tok.action_token_ids(pd, Player::A);
  const Model model = build_synthetic_circuit(default_model_spec(), base_like_circuit(), 0);
  Rng hist_rng(12);
  JointHistory h(pd);
  for (int i = 0; i < 10; ++i) h.push(static_cast<int>(hist_rng.below(2)), static_cast<int>(hist_rng.below(2)));
  const std::string prompt = transcript(pd, h, Player::A);
  Rng rng(13);
  int coop = 0;
  for (int i = 0; i < 1000; ++i) coop += transformer_next_action(model, tok, prompt, ids, 0.7, rng).action == 0;
  CHECK(coop >= 990);
}

TEST_CASE("transformer agent context overflow is an agent error") {
  auto model = std::make_shared<const Model>(
      build_synthetic_circuit(default_model_spec(), instruct_like_circuit(), 0));
  TransformerAgent a(model, "toy");
  ScriptedAgent b({ScriptedKind::kAlwaysDefect});
  MatchConfig cfg;
  cfg.rounds = 300;
  const MatchRecord rec = run_match(a, b, cfg);
  CHECK_FALSE(rec.valid);
  REQUIRE_FALSE(rec.diagnostics.empty());
  CHECK(rec.diagnostics.back().code == "context_overflow");
  CHECK(rec.history.size() == 256);
}

TEST_CASE("transformer agent is deterministic under a seed") {
  auto model = std::make_shared<const Model>(
      build_synthetic_circuit(default_model_spec(), instruct_like_circuit(), 0));
  MatchConfig cfg;
  cfg.rounds = 20;
  cfg.seed = 99;
  TransformerAgent a1(model, "toy"), b1(model, "toy");
  TransformerAgent a2(model, "toy"), b2(model, "toy");
  CHECK(to_jsonl(run_match(a1, b1, cfg)) == to_jsonl(run_match(a2, b2, cfg)));
}
