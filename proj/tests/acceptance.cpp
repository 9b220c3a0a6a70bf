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

// Acceptance checks: one PASS/FAIL line per criterion. Exit status is
// non-zero when any check fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "conformance.hpp"
#include "equilens/agent.hpp"
#include "equilens/circuit.hpp"
#include "equilens/game.hpp"
#include "equilens/interp.hpp"
#include "equilens/match.hpp"
#include "equilens/rng.hpp"
#include "equilens/stats.hpp"
#include "equilens/tokenizer.hpp"
#include "equilens/types.hpp"

namespace {

using namespace equilens;

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

JointHistory repeated(const Game& g, std::vector<std::pair<JointAction, int>> blocks) {
  JointHistory h(g);
  for (const auto& [a, n] : blocks) {
    for (int i = 0; i < n; ++i) h.push(a);
  }
  return h;
}

void nash_distance_goldens(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Game pd = make_game("pd");
  const Equilibria pd_eq = enumerate_equilibria(pd);
  const double all_coop = nash_distance(repeated(pd, {{{0, 0}, 50}}), pd_eq);
  o.check(std::abs(all_coop - 2.0) < 1e-9, "PD all-cooperate");

  const Game mp = make_game("mp");
  // A: 44/50 Heads; B: 47/50 Tails.
  const JointHistory mp_h = repeated(mp, {{{0, 1}, 41}, {{0, 0}, 3}, {{1, 1}, 6}});
  const double mp_d = nash_distance(mp_h, enumerate_equilibria(mp));
  o.check(std::abs(mp_d - 0.82) <= 0.005, "MP 0.88 H / 0.94 T");

  // 31/50 = 62% cooperation for both players.
  const JointHistory sym = repeated(pd, {{{0, 0}, 31}, {{1, 1}, 19}});
  const double sym_d = nash_distance(sym, pd_eq);
  o.check(std::abs(sym_d - 1.24) < 1e-9, "PD symmetric 62%");
  const double secs = seconds_since(t0);
  o.check(secs < 1.0, "runtime");
  o.note << "pd_all_coop=" << all_coop << " mp=" << mp_d << " pd_62=" << sym_d << " (" << secs
         << " s)";
}

// Brute-force oracle on a 1e-3 grid over (P_A(action 0), P_B(action 0)).
struct GridOracle {
  std::vector<std::pair<double, double>> points;
};

double deviation_gain(const Game& g, double p, double q) {
  const Eigen::Vector2d sa(p, 1 - p);
  const Eigen::Vector2d sb(q, 1 - q);
  const Eigen::Vector2d ua = g.payoff_a * sb;
  const Eigen::Vector2d ub = g.payoff_b.transpose() * sa;
  return std::max(ua.maxCoeff() - sa.dot(ua), ub.maxCoeff() - sb.dot(ub));
}

bool grid_matches_enumeration(const Game& g, std::string& why) {
  const Equilibria eqs = enumerate_equilibria(g);
  const double step = 1e-3;
  const double range = std::max(g.payoff_a.maxCoeff() - g.payoff_a.minCoeff(),
                                g.payoff_b.maxCoeff() - g.payoff_b.minCoeff());
  const double eps = 2.0 * range * step;
  // Smallest payoff gap or slope, which bounds how far an eps-equilibrium can
  // drift from an exact one.
  const auto gaps = [](const Eigen::Matrix2d& m) {
    const double d0 = m(0, 0) - m(1, 0);
    const double d1 = m(0, 1) - m(1, 1);
    return std::min({std::abs(d0), std::abs(d1), std::abs(d0 - d1)});
  };
  const double m = std::min(gaps(g.payoff_a), gaps(g.payoff_b.transpose()));
  const double radius = 4.0 * eps / std::max(m, 1e-12) + 4.0 * step;

  for (const auto& prof : eqs.profiles) {
    if (max_deviation_gain(g, prof) > 1e-9) {
      why = "enumerated profile is not an equilibrium";
      return false;
    }
    const double p = std::round(prof.strat_a(0) / step) * step;
    const double q = std::round(prof.strat_b(0) / step) * step;
    if (deviation_gain(g, p, q) > eps) {
      why = "oracle misses an enumerated profile";
      return false;
    }
  }
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 0; i <= n; ++i) {
    const double p = i * step;
    for (int j = 0; j <= n; ++j) {
      const double q = j * step;
      if (deviation_gain(g, p, q) > eps / 4.0) continue;
      bool near = false;
      for (const auto& prof : eqs.profiles) {
        if (std::hypot(prof.strat_a(0) - p, prof.strat_b(0) - q) <= radius) near = true;
      }
      if (!near) {
        why = "oracle equilibrium near (" + std::to_string(p) + ", " + std::to_string(q) +
              ") not enumerated";
        return false;
      }
    }
  }
  return true;
}

void equilibrium_oracle(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  int checked = 0;
  for (const auto& name : canonical_game_names()) {
    std::string why;
    o.check(grid_matches_enumeration(make_game(name), why), name + ": " + why);
    ++checked;
  }
  Rng rng(derive_seed(2024, "random-games"));
  for (int k = 0; k < 200; ++k) {
    std::vector<std::vector<std::array<double, 2>>> pay(2, std::vector<std::array<double, 2>>(2));
    for (auto& row : pay) {
      for (auto& cell : row) cell = {rng.uniform() * 10.0, rng.uniform() * 10.0};
    }
    const Game g = make_custom_game("random" + std::to_string(k), {"X", "Y"}, {"X", "Y"}, pay);
    std::string why;
    if (!grid_matches_enumeration(g, why)) o.check(false, g.name + ": " + why);
    ++checked;
  }
  const auto pd = enumerate_equilibria(make_game("pd"));
  o.check(pd.profiles.size() == 1 && pd.profiles[0].strat_a(1) == 1.0 &&
              pd.profiles[0].strat_b(1) == 1.0,
          "PD unique (D,D)");
  const auto mp = enumerate_equilibria(make_game("mp"));
  o.check(mp.profiles.size() == 1 && std::abs(mp.profiles[0].strat_a(0) - 0.5) < 1e-12 &&
              std::abs(mp.profiles[0].strat_b(0) - 0.5) < 1e-12,
          "MP unique (0.5,0.5)");
  const auto bos = enumerate_equilibria(make_game("bos"));
  bool bos_mixed = false;
  for (const auto& p : bos.profiles) {
    if (p.kind == EquilibriumKind::kMixed && std::abs(p.strat_a(0) - 2.0 / 3.0) < 1e-12 &&
        std::abs(p.strat_b(0) - 1.0 / 3.0) < 1e-12) {
      bos_mixed = true;
    }
  }
  o.check(bos.profiles.size() == 3 && bos_mixed, "BoS mixed point (2/3, 1/3)");
  const double secs = seconds_since(t0);
  o.check(secs < 10.0, "runtime");
  o.note << checked << " games (" << secs << " s)";
}

MatchRecord scripted_match(ScriptedKind a, ScriptedKind b, std::size_t rounds, std::uint64_t seed,
                           const Game& game = make_game("pd")) {
  ScriptedAgent x({a});
  ScriptedAgent y({b});
  MatchConfig cfg;
  cfg.game = game;
  cfg.rounds = rounds;
  cfg.seed = seed;
  return run_match(x, y, cfg);
}

void scripted_match_goldens(Outcome& o) {
  const auto dd = scripted_match(ScriptedKind::kAlwaysDefect, ScriptedKind::kAlwaysDefect, 50, 1);
  const auto cc = scripted_match(ScriptedKind::kAlwaysCoop, ScriptedKind::kAlwaysCoop, 50, 1);
  const auto td = scripted_match(ScriptedKind::kTitForTat, ScriptedKind::kAlwaysDefect, 50, 1);
  o.check(dd.final_distance == 0.0, "always_defect self-play");
  o.check(std::abs(cc.final_distance - 2.0) < 1e-9, "always_coop self-play");
  o.check(std::abs(td.final_distance - 0.028) <= 1e-3, "tit_for_tat vs always_defect");
  const auto r1 = to_jsonl(scripted_match(ScriptedKind::kBernoulli, ScriptedKind::kTitForTat, 50, 42));
  const auto r2 = to_jsonl(scripted_match(ScriptedKind::kBernoulli, ScriptedKind::kTitForTat, 50, 42));
  o.check(r1 == r2, "byte-identical replay");
  o.note << "allD=" << dd.final_distance << " allC=" << cc.final_distance
         << " tft_vs_allD=" << td.final_distance;
}

void fictitious_play_mp(Outcome& o) {
  const auto rec = scripted_match(ScriptedKind::kFictitiousPlay, ScriptedKind::kFictitiousPlay,
                                  5000, 3, make_game("mp"));
  const auto mu_a = empirical_mixed_strategy(rec.history, Player::A);
  const auto mu_b = empirical_mixed_strategy(rec.history, Player::B);
  o.check(rec.valid && rec.history.size() == 5000, "match completed");
  o.check(std::abs(mu_a(0) - 0.5) <= 0.05 && std::abs(mu_b(0) - 0.5) <= 0.05, "marginals");
  o.note << "P_A(Heads)=" << mu_a(0) << " P_B(Heads)=" << mu_b(0);
}

void tournament_cell_count(Outcome& o) {
  TournamentPlan plan;
  for (const char* k : {"always_coop", "always_defect", "tit_for_tat", "fictitious_play"}) {
    plan.agents.push_back({k, {{"kind", k}}});
  }
  for (const auto& g : canonical_game_names()) plan.games.push_back(make_game(g));
  plan.modes = all_modes();
  plan.rounds = 5;
  const auto cells = plan_cells(plan);
  const auto records = run_tournament(plan, [](const AgentSpec& s) -> std::unique_ptr<Agent> {
    return std::make_unique<ScriptedAgent>(ScriptedStrategy{*scripted_kind_from_string(s.id)});
  });
  std::set<std::string> ids;
  for (const auto& c : cells) ids.insert(c.id);
  o.check(cells.size() == 144 && ids.size() == 144, "144 distinct cells");
  o.check(records.size() == 144, "144 records");
  o.note << cells.size() << " cells, " << records.size() << " records";
}

const Tokenizer& tokenizer() {
  static const Tokenizer tok = Tokenizer::standard();
  return tok;
}

std::vector<LabeledPrompt> history_prompts(std::size_t n, std::uint64_t seed) {
  PromptSetOptions opts;
  opts.count = n;
  return random_history_prompts(tokenizer(), make_game("pd"), opts, seed);
}

const std::array<int, 2>& pd_ids() {
  static const auto ids = tokenizer().action_token_ids(make_game("pd"), Player::A);
  return ids;
}

constexpr int kNash = 1;  // Defect

void probe_consumption(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticCircuitConfig cfg = instruct_like_circuit();
  cfg.attenuation = 0.5;
  cfg.noise_scale = 0.3;
  const Model model = build_synthetic_circuit(default_model_spec(), cfg, 5);
  const auto prompts = history_prompts(200, 17);
  const TraceSet set = collect_traces(model, prompts);
  const auto y = probe_labels(ProbeLabel::kOppLastMove, prompts, model, pd_ids(), kNash);
  const auto reports = probe_layers(set.traces, y, "opp_last_move", 23);
  auto shuffled = y;
  Rng rng(99);
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  const auto control = probe_layers(set.traces, shuffled, "shuffled", 23);
  const double first = reports.front().mean_accuracy;
  const double last = reports.back().mean_accuracy;
  o.check(set.failures.empty(), "traces");
  o.check(first >= 0.95, "layer 0 accuracy >= 0.95");
  o.check(last <= 0.60, "last layer accuracy <= 0.60");
  double worst = 0.0;
  for (const auto& r : control) worst = std::max(worst, std::abs(r.mean_accuracy - 0.5));
  o.check(worst <= 0.1, "shuffled labels near chance");
  const double secs = seconds_since(t0);
  o.check(secs < 60.0, "runtime");
  o.note << "layer0=" << first << " last=" << last << " shuffled_max_dev=" << worst << " ("
         << secs << " s)";
}

void override_detection(Outcome& o) {
  const auto prompts = history_prompts(20, 31);
  int hits = 0;
  int per_prompt_misses = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SyntheticCircuitConfig cfg = instruct_like_circuit();
    cfg.noise_scale = 0.05;
    const Model model = build_synthetic_circuit(default_model_spec(), cfg, seed);
    const TraceSet set = collect_traces(model, prompts);
    std::vector<LensSeries> all;
    for (const auto& t : set.traces) {
      all.push_back(logit_lens(t, model.unembedding, pd_ids()));
      const auto l = find_override_layer(all.back(), kNash);
      if (!l || *l != cfg.override_layer) ++per_prompt_misses;
    }
    const auto l = find_override_layer(mean_lens(all), kNash);
    if (l && *l == cfg.override_layer) ++hits;
  }
  o.check(hits == 100, "planted override layer on every seed");
  o.check(per_prompt_misses == 0, "planted override layer on every prompt");

  SyntheticCircuitConfig base = instruct_like_circuit();
  base.final_correction = 0.0;
  const Model model = build_synthetic_circuit(default_model_spec(), base, 0);
  const TraceSet set = collect_traces(model, prompts);
  double min_final = 1.0;
  for (const auto& t : set.traces) {
    min_final = std::min(min_final, logit_lens(t, model.unembedding, pd_ids()).back()(0));
  }
  o.check(min_final > 0.5, "no final correction stays Cooperate-dominant");
  o.note << hits << "/100 seeds, per-prompt misses=" << per_prompt_misses
         << ", min final P(Cooperate) without correction=" << min_final;
}

void head_ablation(Outcome& o) {
  const auto prompts = history_prompts(20, 41);
  const Model model = build_synthetic_circuit(default_model_spec(), instruct_like_circuit(), 0);
  const auto scores = score_opponent_heads(model, prompts);
  const auto heads = top_heads(scores, 5);
  const auto rows = ablation_experiment(model, heads, prompts, pd_ids(), kNash);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, std::abs(r.delta));
  o.check(heads.size() == 5 && rows.size() == 6, "top-5 heads singly and jointly");
  o.check(worst <= 1e-9, "distributed circuit dP(Nash) = 0");

  const SyntheticCircuitConfig loc_cfg = head_localized_circuit();
  const Model loc = build_synthetic_circuit(default_model_spec(), loc_cfg, 0);
  const auto loc_heads = top_heads(score_opponent_heads(loc, prompts), 5);
  const HeadId copy{loc_cfg.override_layer - 1, 3};
  const HeadId one[] = {copy};
  const auto loc_rows = ablation_experiment(loc, one, prompts, pd_ids(), kNash);
  const double loc_delta = loc_rows.front().delta;
  const bool ranked = std::find(loc_heads.begin(), loc_heads.end(), copy) != loc_heads.end();
  o.check(ranked, "localized copy head among top-5");
  o.check(std::abs(loc_delta) >= 0.2, "localized |dP| >= 0.2");
  o.note << "distributed max|dP|=" << worst << " localized dP=" << loc_delta;
}

void direction_agreement(Outcome& o) {
  const Model model = build_synthetic_circuit(default_model_spec(), instruct_like_circuit(), 0);
  const Game pd = make_game("pd");
  const auto coop = constant_history_prompts(tokenizer(), pd, {0, 0}, 2, 20);
  const auto defect = constant_history_prompts(tokenizer(), pd, {1, 1}, 2, 20);
  const TraceSet tc = collect_traces(model, coop);
  const TraceSet td = collect_traces(model, defect);
  std::vector<Eigen::VectorXd> dirs;
  for (auto m : {DirectionMethod::kMeanDiff, DirectionMethod::kPca, DirectionMethod::kProbeNormal}) {
    dirs.push_back(extract_direction(tc.traces, td.traces, 2, m, 7).direction);
  }
  double worst = 1.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      worst = std::min(worst, std::abs(cosine(dirs[i], dirs[j])));
    }
  }
  o.check(worst >= 0.95, "pairwise |cosine| >= 0.95");
  o.note << "min pairwise |cosine|=" << worst;
}

SteeringVector planted_direction(const Model& model) {
  const Game pd = make_game("pd");
  const auto coop = constant_history_prompts(tokenizer(), pd, {0, 0}, 2, 20);
  const auto defect = constant_history_prompts(tokenizer(), pd, {1, 1}, 2, 20);
  return extract_direction(collect_traces(model, coop).traces, collect_traces(model, defect).traces,
                           2, DirectionMethod::kMeanDiff);
}

void steering_sweep_check(Outcome& o) {
  const Model model = build_synthetic_circuit(default_model_spec(), instruct_like_circuit(), 0);
  const auto prompts = history_prompts(20, 51);
  const SteeringVector v = planted_direction(model);
  const SweepResult s =
      steering_sweep(model, v.direction, {0, 1, 2}, default_alpha_grid(), prompts, pd_ids(), kNash);
  o.check(s.points.size() == 61, "grid -20..40");
  o.check(s.correlation >= 0.95, "Spearman >= 0.95");
  o.check(s.points.front().p_nash >= 0.99, "P(Nash) >= 0.99 at alpha = -20");
  bool bitwise = true;
  for (const auto& pt : s.points) {
    if (pt.knob != 0.0) continue;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const auto res = forward(model, std::span<const int>(prompts[i].tokens), HookPlan{},
                               prompts[i].decision_position);
      const Eigen::Vector2d l(res.logits(pd_ids()[0]), res.logits(pd_ids()[1]));
      if (tempered_softmax(l, 1.0)(0) != pt.per_prompt_p_coop[i]) bitwise = false;
    }
  }
  o.check(bitwise, "alpha = 0 equals baseline bitwise");
  o.note << "spearman=" << s.correlation << " P(Nash)@-20=" << s.points.front().p_nash
         << " P(coop)@40=" << s.points.back().p_coop;
}

void clamp_suite(Outcome& o) {
  const Model model =
      build_synthetic_circuit(default_model_spec(), clamp_calibrated_circuit(), 0);
  const auto prompts = history_prompts(20, 61);
  const SteeringVector v = planted_direction(model);
  const SweepResult s =
      clamp_sweep(model, v.direction, v.layer, default_c_grid(), prompts, pd_ids(), kNash);
  o.check(s.max_projection_error <= 1e-6, "projection = c within 1e-6");
  o.check(s.correlation >= 0.99, "Pearson r >= 0.99");
  o.check(s.points.front().p_coop <= 0.01 && s.points.back().p_coop >= 0.99,
          "P(Cooperate) spans <= 0.01 to >= 0.99");
  bool identity = true;
  for (const auto& p : prompts) {
    HookPlan plan;
    plan.clamps.push_back({v.layer, v.direction, std::nullopt});
    const auto a = forward(model, std::span<const int>(p.tokens), HookPlan{}, p.decision_position);
    const auto b = forward(model, std::span<const int>(p.tokens), plan, p.decision_position);
    if ((a.logits - b.logits).cwiseAbs().maxCoeff() > 1e-12) identity = false;
  }
  o.check(identity, "identity clamp leaves outputs unchanged");
  o.note << "pearson=" << s.correlation << " max|proj-c|=" << s.max_projection_error
         << " P(coop)@-30=" << s.points.front().p_coop << " P(coop)@30=" << s.points.back().p_coop;
}

void protocol_conformance(Outcome& o) {
  const auto scratch = std::filesystem::temp_directory_path() /
                       ("equilens-acceptance-" + std::to_string(::getpid()));
  const bool regenerate = std::getenv("EQUILENS_REGEN_GOLDEN") != nullptr;
  const auto results =
      testing::run_conformance(EQUILENS_ECHO_AGENT, EQUILENS_GOLDEN_DIR, scratch, regenerate);
  std::filesystem::remove_all(scratch);
  int passed = 0;
  for (const auto& r : results) {
    if (r.pass) {
      ++passed;
    } else {
      o.check(false, r.name + ": " + r.detail);
    }
  }
  o.note << passed << "/" << results.size() << " golden cases";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> checks = {
      {"nash-distance-goldens", nash_distance_goldens},
      {"equilibrium-oracle", equilibrium_oracle},
      {"scripted-match-goldens", scripted_match_goldens},
      {"fictitious-play-mp", fictitious_play_mp},
      {"tournament-cell-count", tournament_cell_count},
      {"probe-consumption", probe_consumption},
      {"override-detection", override_detection},
      {"head-ablation", head_ablation},
      {"direction-agreement", direction_agreement},
      {"steering-sweep", steering_sweep_check},
      {"concept-clamp", clamp_suite},
      {"protocol-conformance", protocol_conformance},
  };
  int failures = 0;
  for (const auto& [name, fn] : checks) {
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.note.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
