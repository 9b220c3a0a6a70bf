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

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "equilens/circuit.hpp"
#include "equilens/interp.hpp"
#include "equilens/report.hpp"
#include "equilens/rng.hpp"
#include "equilens/stats.hpp"

using namespace equilens;

namespace {

ProbeDataset coordinate_dataset(int n, int dim, int axis, std::uint64_t seed) {
  Rng rng(seed);
  ProbeDataset d;
  d.X.resize(n, dim);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) d.X(i, j) = rng.normal();
    d.y(i) = i % 2;
    d.X(i, axis) = (d.y(i) ? 1.0 : -1.0) * (1.0 + rng.uniform());
  }
  return d;
}

}  // namespace

TEST_CASE("trace collection") {
  const Tokenizer tok = Tokenizer::standard();
  const Model m = build_synthetic_circuit(default_model_spec(), instruct_like_circuit(), 0);
  PromptSetOptions opts;
  opts.count = 20;
  const auto prompts = random_history_prompts(tok, make_game("pd"), opts, 1);
  REQUIRE(prompts.size() == 20);
  const auto set = collect_traces(m, prompts);
  CHECK(set.failures.empty());
  REQUIRE(set.traces.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(set.traces[i].layers.size() == 9);
    CHECK(set.traces[i].prompt_id == prompts[i].id);
    CHECK(set.traces[i].position == prompts[i].decision_position);
    CHECK(prompts[i].decision_position == static_cast<int>(prompts[i].tokens.size()) - 1);
  }
  const Eigen::MatrixXd X = layer_matrix(set.traces, 4);
  CHECK(X.rows() == 20);
  CHECK(X.cols() == 64);
  CHECK(random_history_prompts(tok, make_game("pd"), opts, 1)[7].tokens == prompts[7].tokens);

  std::vector<LabeledPrompt> broken{prompts[0]};
  broken[0].tokens.assign(600, 0);
  broken[0].decision_position = 599;
  const auto bad = collect_traces(m, broken);
  CHECK(bad.traces.empty());
  REQUIRE(bad.failures.size() == 1);
  CHECK(bad.failures[0].prompt_id == prompts[0].id);
}

TEST_CASE("probe recovers a separable coordinate") {
  const ProbeDataset d = coordinate_dataset(200, 16, 7, 3);
  const ProbeReport r = train_probe(d, 0);
  CHECK(r.mean_accuracy == 1.0);
  CHECK(r.fold_accuracies.size() == 5);
  Eigen::Index arg;
  r.normal.cwiseAbs().maxCoeff(&arg);
  CHECK(arg == 7);
  CHECK(r.normal(7) > 0);
}

TEST_CASE("probe on random labels stays near chance") {
  ProbeDataset d = coordinate_dataset(400, 16, 7, 5);
  Rng rng(9);
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y(i) = rng.uniform() < 0.5 ? 1 : 0;
  const ProbeReport r = train_probe(d, 0);
  CHECK(r.mean_accuracy > 0.35);
  CHECK(r.mean_accuracy < 0.65);
}

TEST_CASE("probe input errors") {
  ProbeDataset d = coordinate_dataset(40, 4, 1, 1);
  d.y.setZero();
  CHECK_THROWS_AS(train_probe(d, 0), InterpError);
  d = coordinate_dataset(12, 4, 1, 1);
  CHECK_THROWS_AS(train_probe(d, 0), InterpError);
  d = coordinate_dataset(40, 4, 1, 1);
  d.y(0) = 2;
  CHECK_THROWS_AS(train_probe(d, 0), InterpError);
  d = coordinate_dataset(40, 4, 1, 1);
  d.y.conservativeResize(39);
  CHECK_THROWS_AS(train_probe(d, 0), InterpError);
}

TEST_CASE("logit lens") {
  ResidualTrace t;
  t.layers = {Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(-1.0, 0.0), Eigen::Vector2d(0.0, 3.0)};
  const Eigen::MatrixXd U = Eigen::MatrixXd::Identity(2, 3);
  const auto lens = logit_lens(t, U, {0, 1});
  REQUIRE(lens.size() == 3);
  CHECK(lens[0](0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(lens[1](1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(lens[2](1) == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))));
  for (const auto& p : lens) CHECK(p.sum() == doctest::Approx(1.0));

  CHECK(find_override_layer(lens, 0) == 1);
  CHECK(find_override_layer(lens, 1) == 0);
  LensSeries flip_back{Eigen::Vector2d(0.9, 0.1), Eigen::Vector2d(0.2, 0.8),
                       Eigen::Vector2d(0.7, 0.3), Eigen::Vector2d(0.4, 0.6)};
  CHECK(find_override_layer(flip_back, 0) == 1);
  CHECK_THROWS_AS(find_override_layer({}, 0), InterpError);
  CHECK_THROWS_AS(find_override_layer(lens, 2), InterpError);

  const LensSeries m = mean_lens(std::vector<LensSeries>{lens, lens});
  CHECK(m[2](1) == doctest::Approx(lens[2](1)));
}

TEST_CASE("override layer follows the circuit configuration") {
  const Tokenizer tok = Tokenizer::standard();
  const Game pd = make_game("pd");
  for (int layer : {5, 6}) {
    auto cfg = instruct_like_circuit();
    cfg.override_layer = layer;
    const Model m = build_synthetic_circuit(default_model_spec(), cfg, 0);
    PromptSetOptions opts;
    opts.count = 30;
    const auto prompts = random_history_prompts(tok, pd, opts, 2);
    const auto traces = collect_traces(m, prompts);
    std::vector<LensSeries> all;
    for (const auto& t : traces.traces) {
      all.push_back(logit_lens(t, m.unembedding, tok.action_token_ids(pd, Player::A)));
      CHECK(find_override_layer(all.back(), 1) == layer);
    }
    CHECK(find_override_layer(mean_lens(all), 1) == layer);
  }
}

TEST_CASE("nash action index") {
  CHECK(nash_action_index(make_game("pd"), Player::A) == 1);
  CHECK(nash_action_index(make_game("pd"), Player::B) == 1);
  CHECK_FALSE(nash_action_index(make_game("mp"), Player::A).has_value());
  CHECK_FALSE(nash_action_index(make_game("bos"), Player::A).has_value());
}

TEST_CASE("head scores under uniform attention") {
  const Tokenizer tok = Tokenizer::standard();
  ModelSpec spec = default_model_spec();
  spec.n_layers = 2;
  const Model m = Model::zeros(spec);
  JointHistory h(make_game("pd"));
  h.push({0, 1});
  h.push({1, 0});
  const LabeledPrompt p = make_prompt(tok, h.game(), h, Player::A, "p0");
  const double expected = static_cast<double>(p.opponent_positions.size()) /
                          static_cast<double>(p.decision_position + 1);
  const auto scores = score_opponent_heads(m, std::vector<LabeledPrompt>{p});
  REQUIRE(scores.size() == 8);
  for (const auto& s : scores) CHECK(s.score == doctest::Approx(expected).epsilon(1e-12));
  CHECK(top_heads(scores, 3).size() == 3);
  CHECK(top_heads(scores, 30).size() == 8);
  CHECK(top_heads(scores, 1)[0] == HeadId{0, 0});
  CHECK_THROWS_AS(score_opponent_heads(m, std::vector<LabeledPrompt>{}), InterpError);
}

TEST_CASE("ablation experiment") {
  const Tokenizer tok = Tokenizer::standard();
  const Game pd = make_game("pd");
  const Model m = build_synthetic_circuit(default_model_spec(), instruct_like_circuit(), 0);
  PromptSetOptions opts;
  opts.count = 10;
  const auto prompts = random_history_prompts(tok, pd, opts, 6);
  const auto ids = tok.action_token_ids(pd, Player::A);
  const auto none = ablation_experiment(m, {}, prompts, ids, 1);
  REQUIRE(none.size() == 1);
  CHECK(none[0].condition == "joint");
  CHECK(none[0].delta == 0.0);
  const std::vector<HeadId> heads{{1, 2}, {4, 1}};
  const auto rows = ablation_experiment(m, heads, prompts, ids, 1);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].condition == "L1H2");
  CHECK(rows[2].heads == heads);
  for (const auto& r : rows) {
    CHECK(r.p_nash_baseline == none[0].p_nash_baseline);
    CHECK(r.delta == doctest::Approx(r.p_nash_ablated - r.p_nash_baseline));
  }
}

TEST_CASE("direction extraction") {
  Rng rng(4);
  Eigen::MatrixXd coop(30, 8), defect(30, 8);
  for (Eigen::Index i = 0; i < coop.size(); ++i) {
    coop.data()[i] = 0.01 * rng.normal();
    defect.data()[i] = 0.01 * rng.normal();
  }
  coop.col(3).array() += 2.0;
  defect.col(3).array() -= 2.0;
  for (auto method : {DirectionMethod::kMeanDiff, DirectionMethod::kPca,
                      DirectionMethod::kProbeNormal}) {
    const auto sv = extract_direction(coop, defect, 2, method);
    CHECK(sv.direction.norm() == doctest::Approx(1.0));
    CHECK(sv.direction(3) > 0.99);
    CHECK(sv.layer == 2);
    CHECK(sv.n_coop == 30);
    CHECK(direction_method_from_string(to_string(method)) == method);
  }
  const auto fwd = extract_direction(coop, defect, 0, DirectionMethod::kMeanDiff);
  const auto rev = extract_direction(defect, coop, 0, DirectionMethod::kMeanDiff);
  CHECK((fwd.direction + rev.direction).norm() < 1e-12);
  CHECK_THROWS_AS(extract_direction(coop, coop, 0, DirectionMethod::kMeanDiff), InterpError);
  CHECK_THROWS_AS(extract_direction(coop, Eigen::MatrixXd(0, 8), 0, DirectionMethod::kMeanDiff),
                  InterpError);
  CHECK_THROWS(direction_method_from_string("svd"));
}

TEST_CASE("correlation statistics") {
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) ==
        doctest::Approx(0.5));
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 4, 9, 16}) ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                  StatsError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), StatsError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), StatsError);
}

TEST_CASE("sweep grids and plots") {
  CHECK(default_alpha_grid().size() == 61);
  CHECK(default_alpha_grid().front() == -20);
  CHECK(default_alpha_grid().back() == 40);
  CHECK(default_c_grid().size() == 13);

  const Tokenizer tok = Tokenizer::standard();
  const Game pd = make_game("pd");
  const Model m = build_synthetic_circuit(default_model_spec(), instruct_like_circuit(), 0);
  PromptSetOptions opts;
  opts.count = 5;
  const auto prompts = random_history_prompts(tok, pd, opts, 8);
  const auto ids = tok.action_token_ids(pd, Player::A);
  Eigen::VectorXd v = Eigen::VectorXd::Unit(64, 1);
  const auto sweep = steering_sweep(m, v, {2}, default_alpha_grid(), prompts, ids, 1);
  CHECK(sweep.points.size() == 61);
  CHECK(sweep.knob == "alpha");
  CHECK(sweep.statistic == "spearman");
  for (const auto& p : sweep.points) {
    CHECK(p.n == 5);
    CHECK(p.p_coop + p.p_nash == doctest::Approx(1.0));
  }
  const auto dir = std::filesystem::temp_directory_path() / "equilens-test-sweep";
  std::filesystem::remove_all(dir);
  emit_plot_data(sweep_plot(sweep), dir);
  std::ifstream in(dir / "series.csv");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 62);
  std::filesystem::remove_all(dir);

  const auto clamp = clamp_sweep(m, v, 4, {-10, 0, 10}, prompts, ids, 1);
  CHECK(clamp.knob == "c");
  CHECK(clamp.statistic == "pearson");
  CHECK(clamp.max_projection_error < 1e-9);
  CHECK_THROWS_AS(clamp_sweep(m, v, 4, {}, prompts, ids, 1), InterpError);
  CHECK_THROWS_AS(clamp_sweep(m, 2.0 * v, 4, {1.0}, prompts, ids, 1), std::invalid_argument);

  ResidualTrace t;
  for (int l = 0; l < 9; ++l) t.layers.push_back(Eigen::VectorXd::Zero(64));
  const PlotData lp = lens_plot(logit_lens(t, m.unembedding, ids), {"Cooperate", "Defect"});
  CHECK(lp.x.size() == 9);
  CHECK(lp.series.size() == 2);
}
