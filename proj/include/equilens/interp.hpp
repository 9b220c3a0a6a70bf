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

#ifndef EQUILENS_INTERP_HPP_
#define EQUILENS_INTERP_HPP_

// Analysis pipeline over residual traces: prompt sets, linear probes,
// logit lens, head scoring and ablation, direction extraction, steering
// and clamping sweeps.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "equilens/game.hpp"
#include "equilens/tokenizer.hpp"
#include "equilens/transformer.hpp"

namespace equilens {

class InterpError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------- prompts

struct LabeledPrompt {
  std::string id;
  std::vector<int> tokens;
  // Token index read by traces; the last token of a transcript.
  int decision_position = 0;
  std::vector<int> opponent_positions;
  // Opponent's and agent's last actions (-1 on round 1).
  int opp_last_move = -1;
  int own_last_move = -1;
};

// Builds a prompt from a history seen by `role`.
LabeledPrompt make_prompt(const Tokenizer& tok, const Game& game, const JointHistory& history,
                          Player role, std::string id);

struct PromptSetOptions {
  std::size_t count = 200;
  std::size_t min_rounds = 2;
  std::size_t max_rounds = 49;
  // Probability that each player takes action 0 in each round.
  double p_own_action0 = 0.5;
  double p_opp_action0 = 0.5;
  Player role = Player::A;
};

// Random histories with independently drawn actions and lengths.
std::vector<LabeledPrompt> random_history_prompts(const Tokenizer& tok, const Game& game,
                                                  const PromptSetOptions& opts,
                                                  std::uint64_t seed);

// One prompt per length in [min_rounds, max_rounds] repeating `action`.
std::vector<LabeledPrompt> constant_history_prompts(const Tokenizer& tok, const Game& game,
                                                    JointAction action, std::size_t min_rounds,
                                                    std::size_t max_rounds,
                                                    Player role = Player::A);

// ----------------------------------------------------------------- traces

enum class PositionRule { kLastToken, kPromptDefined };

struct TraceFailure {
  std::string prompt_id;
  std::string message;
};

struct TraceSet {
  std::vector<ResidualTrace> traces;
  std::vector<TraceFailure> failures;
};

// One forward pass per prompt; prompts that fail are listed, not thrown.
TraceSet collect_traces(const Model& model, std::span<const LabeledPrompt> prompts,
                        PositionRule rule = PositionRule::kPromptDefined,
                        const HookPlan& hooks = {});

// Rows = traces, columns = residual coordinates at `layer`.
Eigen::MatrixXd layer_matrix(std::span<const ResidualTrace> traces, int layer);

// ----------------------------------------------------------------- probes

enum class ProbeLabel { kNashAction, kOppLastMove, kCooperated };

const char* to_string(ProbeLabel l);
ProbeLabel probe_label_from_string(std::string_view s);

struct ProbeDataset {
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
  int layer = 0;
  std::string label;

  void validate(std::size_t min_per_class = 10) const;
};

struct ProbeOptions {
  int folds = 5;
  double l2 = 1e-3;
  double tol = 1e-8;
  int max_iter = 10000;
};

struct LogisticFit {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  // Feature means subtracted before the linear map.
  Eigen::VectorXd center;
  int iterations = 0;

  double probability(const Eigen::VectorXd& x) const;
  int predict(const Eigen::VectorXd& x) const { return probability(x) >= 0.5 ? 1 : 0; }
};

// L2-penalized logistic regression by full-batch gradient descent on
// centered features; the intercept is not penalized.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                         const ProbeOptions& opts = {});

struct ProbeReport {
  int layer = 0;
  std::string label;
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracies;
  // Fitted on the full dataset.
  Eigen::VectorXd normal;
  double intercept = 0.0;
};

// Stratified k-fold cross-validation with seeded fold assignment.
ProbeReport train_probe(const ProbeDataset& data, std::uint64_t seed, const ProbeOptions& opts = {});

// One report per layer 0..L.
std::vector<ProbeReport> probe_layers(std::span<const ResidualTrace> traces,
                                      const std::vector<int>& labels, const std::string& label,
                                      std::uint64_t seed, const ProbeOptions& opts = {});

// Labels for `prompts`: opponent's last move, agent's last move being
// action 0, or the model's greedy choice being the Nash action.
std::vector<int> probe_labels(ProbeLabel label, std::span<const LabeledPrompt> prompts,
                              const Model& model, const std::array<int, 2>& action_ids,
                              int nash_index);

// ------------------------------------------------------------------- lens

// Per layer: softmax over the two action logits of W_U h_l.
using LensSeries = std::vector<Eigen::Vector2d>;

LensSeries logit_lens(const ResidualTrace& trace, const Eigen::MatrixXd& unembedding,
                      const std::array<int, 2>& action_ids, double temperature = 1.0);
LensSeries mean_lens(std::span<const LensSeries> series);

// Smallest l with P(non-Nash) > 0.5 at l and <= 0.5 at l-1 (treated as
// satisfied for l = 0).
std::optional<int> find_override_layer(const LensSeries& series, int nash_index);

// Index of the Nash action for `p` when the game has a unique pure
// equilibrium; nullopt otherwise.
std::optional<int> nash_action_index(const Game& game, Player p);

// ------------------------------------------------------------------ heads

struct HeadScore {
  HeadId head;
  double score = 0.0;
};

// Attention mass from the decision position onto opponent-action
// positions, averaged over prompts; descending, ties by (layer, head).
std::vector<HeadScore> score_opponent_heads(const Model& model,
                                            std::span<const LabeledPrompt> prompts);

std::vector<HeadId> top_heads(std::span<const HeadScore> scores, std::size_t k);

struct AblationRow {
  std::string condition;
  std::vector<HeadId> heads;
  double p_nash_baseline = 0.0;
  double p_nash_ablated = 0.0;
  double delta = 0.0;
};

// One row per head, then one joint row (only the joint row when `heads`
// is empty). P(Nash) is read from the final-layer lens.
std::vector<AblationRow> ablation_experiment(const Model& model, std::span<const HeadId> heads,
                                             std::span<const LabeledPrompt> prompts,
                                             const std::array<int, 2>& action_ids, int nash_index,
                                             double temperature = 1.0);

// ------------------------------------------------------------- directions

enum class DirectionMethod { kMeanDiff, kPca, kProbeNormal };

const char* to_string(DirectionMethod m);
DirectionMethod direction_method_from_string(std::string_view s);

struct SteeringVector {
  Eigen::VectorXd direction;
  int layer = 0;
  DirectionMethod method = DirectionMethod::kMeanDiff;
  std::size_t n_coop = 0;
  std::size_t n_defect = 0;
};

inline constexpr double kDegenerateContrast = 1e-8;

// Rows are hidden states at one layer.
SteeringVector extract_direction(const Eigen::MatrixXd& coop, const Eigen::MatrixXd& defect,
                                 int layer, DirectionMethod method, std::uint64_t seed = 0);
SteeringVector extract_direction(std::span<const ResidualTrace> coop,
                                 std::span<const ResidualTrace> defect, int layer,
                                 DirectionMethod method, std::uint64_t seed = 0);

// ----------------------------------------------------------------- sweeps

struct SweepPoint {
  double knob = 0.0;
  double p_coop = 0.0;
  double p_nash = 0.0;
  std::size_t n = 0;
  std::vector<double> per_prompt_p_coop;
};

struct SweepResult {
  std::string knob;       // "alpha" or "c"
  std::string statistic;  // "spearman" or "pearson"
  std::vector<SweepPoint> points;
  double correlation = 0.0;
  // Clamp sweeps: largest |h_l . v - c| over prompts and grid points.
  double max_projection_error = 0.0;
};

std::vector<double> default_alpha_grid();
std::vector<double> default_c_grid();

// Adds alpha * v at every layer in `layers`; correlation is Spearman over
// (alpha, mean P(action 0)).
SweepResult steering_sweep(const Model& model, const Eigen::VectorXd& vector,
                           const std::vector<int>& layers, const std::vector<double>& alpha_grid,
                           std::span<const LabeledPrompt> prompts,
                           const std::array<int, 2>& action_ids, int nash_index,
                           double temperature = 1.0);

// Clamps the projection on `unit` at `layer` to each c; correlation is
// Pearson over all (c, per-prompt P(action 0)) pairs.
SweepResult clamp_sweep(const Model& model, const Eigen::VectorXd& unit, int layer,
                        const std::vector<double>& c_grid, std::span<const LabeledPrompt> prompts,
                        const std::array<int, 2>& action_ids, int nash_index,
                        double temperature = 1.0);

}  // namespace equilens

#endif  // EQUILENS_INTERP_HPP_
