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

#include "equilens/interp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "equilens/rng.hpp"
#include "equilens/stats.hpp"

namespace equilens {
namespace {

void check_action_ids(const Model& model, const std::array<int, 2>& ids) {
  for (int id : ids) {
    if (id < 0 || id >= model.spec.vocab_size()) throw InterpError("action token id out of range");
  }
}

void check_nash_index(int nash_index) {
  if (nash_index != 0 && nash_index != 1) throw InterpError("nash index must be 0 or 1");
}

Eigen::Vector2d action_probs(const Eigen::VectorXd& logits, const std::array<int, 2>& ids,
                             double temperature) {
  const Eigen::Vector2d l(logits(ids[0]), logits(ids[1]));
  return tempered_softmax(l, temperature);
}

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

// ---------------------------------------------------------------- prompts

LabeledPrompt make_prompt(const Tokenizer& tok, const Game& game, const JointHistory& history,
                          Player role, std::string id) {
  LabeledPrompt p;
  p.id = std::move(id);
  p.tokens = tok.encode(transcript(game, history, role));
  p.decision_position = static_cast<int>(p.tokens.size()) - 1;
  p.opponent_positions = opponent_positions(tok, p.tokens);
  if (!history.empty()) {
    p.opp_last_move = history.action(other(role), history.size() - 1);
    p.own_last_move = history.action(role, history.size() - 1);
  }
  return p;
}

std::vector<LabeledPrompt> random_history_prompts(const Tokenizer& tok, const Game& game,
                                                  const PromptSetOptions& opts,
                                                  std::uint64_t seed) {
  if (opts.min_rounds > opts.max_rounds) throw InterpError("prompts: min_rounds > max_rounds");
  Rng rng(derive_seed(seed, "prompts"));
  std::vector<LabeledPrompt> out;
  out.reserve(opts.count);
  const std::size_t span = opts.max_rounds - opts.min_rounds + 1;
  for (std::size_t i = 0; i < opts.count; ++i) {
    const std::size_t t = opts.min_rounds + rng.below(span);
    JointHistory h(game);
    for (std::size_t r = 0; r < t; ++r) {
      const int own = rng.uniform() < opts.p_own_action0 ? 0 : 1;
      const int opp = rng.uniform() < opts.p_opp_action0 ? 0 : 1;
      h.push(opts.role == Player::A ? JointAction{own, opp} : JointAction{opp, own});
    }
    out.push_back(make_prompt(tok, game, h, opts.role, "p" + std::to_string(i)));
  }
  return out;
}

std::vector<LabeledPrompt> constant_history_prompts(const Tokenizer& tok, const Game& game,
                                                    JointAction action, std::size_t min_rounds,
                                                    std::size_t max_rounds, Player role) {
  if (min_rounds > max_rounds) throw InterpError("prompts: min_rounds > max_rounds");
  std::vector<LabeledPrompt> out;
  for (std::size_t t = min_rounds; t <= max_rounds; ++t) {
    JointHistory h(game);
    for (std::size_t r = 0; r < t; ++r) h.push(action);
    out.push_back(make_prompt(tok, game, h, role,
                              "const" + std::to_string(action.a) + std::to_string(action.b) + "_" +
                                  std::to_string(t)));
  }
  return out;
}

// ----------------------------------------------------------------- traces

TraceSet collect_traces(const Model& model, std::span<const LabeledPrompt> prompts,
                        PositionRule rule, const HookPlan& hooks) {
  TraceSet out;
  out.traces.reserve(prompts.size());
  for (const auto& p : prompts) {
    try {
      const std::optional<int> pos =
          rule == PositionRule::kPromptDefined ? std::optional<int>(p.decision_position) : std::nullopt;
      auto res = forward(model, std::span<const int>(p.tokens), hooks, pos);
      res.trace.prompt_id = p.id;
      out.traces.push_back(std::move(res.trace));
    } catch (const ModelError& e) {
      out.failures.push_back({p.id, e.what()});
    }
  }
  return out;
}

Eigen::MatrixXd layer_matrix(std::span<const ResidualTrace> traces, int layer) {
  if (traces.empty()) throw InterpError("layer_matrix: no traces");
  const auto n_layers = static_cast<int>(traces.front().layers.size());
  if (layer < 0 || layer >= n_layers) throw InterpError("layer_matrix: layer out of range");
  const auto d = traces.front().layers.front().size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(traces.size()), d);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = traces[i].layers[static_cast<std::size_t>(layer)].transpose();
  }
  return X;
}

// ----------------------------------------------------------------- probes

const char* to_string(ProbeLabel l) {
  switch (l) {
    case ProbeLabel::kNashAction:
      return "nash_action";
    case ProbeLabel::kOppLastMove:
      return "opp_last_move";
    case ProbeLabel::kCooperated:
      return "cooperated";
  }
  return "opp_last_move";
}

ProbeLabel probe_label_from_string(std::string_view s) {
  if (s == "nash_action") return ProbeLabel::kNashAction;
  if (s == "opp_last_move") return ProbeLabel::kOppLastMove;
  if (s == "cooperated") return ProbeLabel::kCooperated;
  throw InterpError("unknown probe label '" + std::string(s) + "'");
}

void ProbeDataset::validate(std::size_t min_per_class) const {
  if (X.rows() != y.size()) throw InterpError("probe: row count differs from label count");
  std::size_t n1 = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0 && y(i) != 1) throw InterpError("probe: labels must be 0 or 1");
    n1 += static_cast<std::size_t>(y(i));
  }
  const std::size_t n0 = static_cast<std::size_t>(y.size()) - n1;
  if (n0 == 0 || n1 == 0) throw InterpError("probe: single-class dataset");
  if (n0 < min_per_class || n1 < min_per_class) {
    throw InterpError("probe: need at least " + std::to_string(min_per_class) + " rows per class");
  }
}

double LogisticFit::probability(const Eigen::VectorXd& x) const {
  return sigmoid((x - center).dot(weights) + intercept);
}

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                         const ProbeOptions& opts) {
  if (X.rows() != y.size() || X.rows() == 0) throw InterpError("fit_logistic: bad shapes");
  const auto n = static_cast<double>(X.rows());
  LogisticFit fit;
  fit.center = X.colwise().mean().transpose();
  const Eigen::MatrixXd Z = X.rowwise() - fit.center.transpose();
  const Eigen::VectorXd yd = y.cast<double>();

  const Eigen::MatrixXd cov = (Z.transpose() * Z) / n;
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .maxCoeff();
  const double step = 1.0 / (0.25 * std::max(lmax, 1.0) + opts.l2);

  fit.weights = Eigen::VectorXd::Zero(X.cols());
  fit.intercept = 0.0;
  auto loss = [&](const Eigen::VectorXd& z) {
    double l = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      // log(1 + e^z) - y z, evaluated stably.
      const double zi = z(i);
      l += (zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi))) - yd(i) * zi;
    }
    return l / n + 0.5 * opts.l2 * fit.weights.squaredNorm();
  };
  Eigen::VectorXd z = Eigen::VectorXd::Zero(X.rows());
  double prev = loss(z);
  for (int it = 0; it < opts.max_iter; ++it) {
    Eigen::VectorXd r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = sigmoid(z(i)) - yd(i);
    const Eigen::VectorXd gw = Z.transpose() * r / n + opts.l2 * fit.weights;
    const double gb = r.sum() / n;
    fit.weights -= step * gw;
    fit.intercept -= step * gb;
    z = (Z * fit.weights).array() + fit.intercept;
    const double cur = loss(z);
    fit.iterations = it + 1;
    if (std::abs(prev - cur) < opts.tol) break;
    prev = cur;
  }
  return fit;
}

ProbeReport train_probe(const ProbeDataset& data, std::uint64_t seed, const ProbeOptions& opts) {
  data.validate();
  if (opts.folds < 2) throw InterpError("probe: folds must be >= 2");
  ProbeReport rep;
  rep.layer = data.layer;
  rep.label = data.label;

  // Stratified assignment: shuffle each class, deal round-robin.
  Rng rng(derive_seed(seed, "folds"));
  std::vector<int> fold(static_cast<std::size_t>(data.y.size()), 0);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> idx;
    for (Eigen::Index i = 0; i < data.y.size(); ++i) {
      if (data.y(i) == cls) idx.push_back(static_cast<std::size_t>(i));
    }
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = static_cast<int>(k % opts.folds);
  }

  for (int f = 0; f < opts.folds; ++f) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
    for (std::size_t i = 0; i < fold.size(); ++i) {
      (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
    }
    if (test.empty()) continue;
    const Eigen::MatrixXd Xtr = data.X(train, Eigen::all);
    const Eigen::VectorXi ytr = data.y(train);
    const LogisticFit fit = fit_logistic(Xtr, ytr, opts);
    std::size_t correct = 0;
    for (Eigen::Index i : test) {
      correct += fit.predict(data.X.row(i).transpose()) == data.y(i) ? 1 : 0;
    }
    rep.fold_accuracies.push_back(static_cast<double>(correct) / static_cast<double>(test.size()));
  }
  rep.mean_accuracy = std::accumulate(rep.fold_accuracies.begin(), rep.fold_accuracies.end(), 0.0) /
                      static_cast<double>(rep.fold_accuracies.size());
  const LogisticFit full = fit_logistic(data.X, data.y, opts);
  rep.normal = full.weights;
  rep.intercept = full.intercept - full.center.dot(full.weights);
  return rep;
}

std::vector<ProbeReport> probe_layers(std::span<const ResidualTrace> traces,
                                      const std::vector<int>& labels, const std::string& label,
                                      std::uint64_t seed, const ProbeOptions& opts) {
  if (traces.size() != labels.size()) throw InterpError("probe: traces and labels differ in size");
  if (traces.empty()) throw InterpError("probe: no traces");
  Eigen::VectorXi y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
  std::vector<ProbeReport> out;
  const auto n_layers = static_cast<int>(traces.front().layers.size());
  for (int l = 0; l < n_layers; ++l) {
    ProbeDataset ds{layer_matrix(traces, l), y, l, label};
    out.push_back(train_probe(ds, derive_seed(seed, "layer" + std::to_string(l)), opts));
  }
  return out;
}

std::vector<int> probe_labels(ProbeLabel label, std::span<const LabeledPrompt> prompts,
                              const Model& model, const std::array<int, 2>& action_ids,
                              int nash_index) {
  std::vector<int> y;
  y.reserve(prompts.size());
  for (const auto& p : prompts) {
    switch (label) {
      case ProbeLabel::kOppLastMove:
        if (p.opp_last_move < 0) throw InterpError("probe: prompt " + p.id + " has no history");
        y.push_back(p.opp_last_move);
        break;
      case ProbeLabel::kCooperated:
        if (p.own_last_move < 0) throw InterpError("probe: prompt " + p.id + " has no history");
        y.push_back(p.own_last_move == 0 ? 1 : 0);
        break;
      case ProbeLabel::kNashAction: {
        check_action_ids(model, action_ids);
        check_nash_index(nash_index);
        const auto res = forward(model, std::span<const int>(p.tokens), HookPlan{}, p.decision_position);
        const Eigen::Vector2d pr = action_probs(res.logits, action_ids, 0.0);
        y.push_back(pr(nash_index) == 1.0 ? 1 : 0);
        break;
      }
    }
  }
  return y;
}

// ------------------------------------------------------------------- lens

LensSeries logit_lens(const ResidualTrace& trace, const Eigen::MatrixXd& unembedding,
                      const std::array<int, 2>& action_ids, double temperature) {
  for (int id : action_ids) {
    if (id < 0 || id >= unembedding.cols()) throw InterpError("logit_lens: action id out of range");
  }
  LensSeries out;
  out.reserve(trace.layers.size());
  for (const auto& h : trace.layers) {
    const Eigen::Vector2d l(unembedding.col(action_ids[0]).dot(h), unembedding.col(action_ids[1]).dot(h));
    out.push_back(tempered_softmax(l, temperature));
  }
  return out;
}

LensSeries mean_lens(std::span<const LensSeries> series) {
  if (series.empty()) throw InterpError("mean_lens: no series");
  LensSeries out(series.front().size(), Eigen::Vector2d::Zero());
  for (const auto& s : series) {
    if (s.size() != out.size()) throw InterpError("mean_lens: series differ in length");
    for (std::size_t l = 0; l < s.size(); ++l) out[l] += s[l];
  }
  for (auto& v : out) v /= static_cast<double>(series.size());
  return out;
}

std::optional<int> find_override_layer(const LensSeries& series, int nash_index) {
  if (series.empty()) throw InterpError("find_override_layer: empty series");
  check_nash_index(nash_index);
  const int other_index = 1 - nash_index;
  for (std::size_t l = 0; l < series.size(); ++l) {
    const bool flipped = series[l](other_index) > 0.5;
    const bool before = l == 0 || series[l - 1](other_index) <= 0.5;
    if (flipped && before) return static_cast<int>(l);
  }
  return std::nullopt;
}

std::optional<int> nash_action_index(const Game& game, Player p) {
  const Equilibria eqs = enumerate_equilibria(game, {false});
  if (eqs.profiles.size() != 1 || eqs.profiles.front().kind != EquilibriumKind::kPure) {
    return std::nullopt;
  }
  return eqs.profiles.front().strategy(p)(0) == 1.0 ? 0 : 1;
}

// ------------------------------------------------------------------ heads

std::vector<HeadScore> score_opponent_heads(const Model& model,
                                            std::span<const LabeledPrompt> prompts) {
  if (prompts.empty()) throw InterpError("score_opponent_heads: no prompts");
  const int L = model.spec.n_layers;
  const int H = model.spec.n_heads;
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(L, H);
  for (const auto& p : prompts) {
    if (p.opponent_positions.empty()) {
      throw InterpError("score_opponent_heads: prompt " + p.id + " has no opponent positions");
    }
    const auto att = attention_weights(model, std::span<const int>(p.tokens));
    for (int l = 0; l < L; ++l) {
      for (int h = 0; h < H; ++h) {
        const auto& w = att[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)];
        double mass = 0.0;
        for (int pos : p.opponent_positions) {
          if (pos <= p.decision_position) mass += w(p.decision_position, pos);
        }
        total(l, h) += mass;
      }
    }
  }
  std::vector<HeadScore> out;
  for (int l = 0; l < L; ++l) {
    for (int h = 0; h < H; ++h) {
      out.push_back({{l, h}, total(l, h) / static_cast<double>(prompts.size())});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const HeadScore& a, const HeadScore& b) { return a.score > b.score; });
  return out;
}

std::vector<HeadId> top_heads(std::span<const HeadScore> scores, std::size_t k) {
  std::vector<HeadId> out;
  for (std::size_t i = 0; i < std::min(k, scores.size()); ++i) out.push_back(scores[i].head);
  return out;
}

std::vector<AblationRow> ablation_experiment(const Model& model, std::span<const HeadId> heads,
                                             std::span<const LabeledPrompt> prompts,
                                             const std::array<int, 2>& action_ids, int nash_index,
                                             double temperature) {
  check_action_ids(model, action_ids);
  check_nash_index(nash_index);
  if (prompts.empty()) throw InterpError("ablation: no prompts");
  auto mean_p_nash = [&](const std::vector<HeadId>& ablated) {
    const AblatedView<double> view = zero_ablate(model, ablated);
    double sum = 0.0;
    for (const auto& p : prompts) {
      const auto res = forward(view, std::span<const int>(p.tokens), {}, p.decision_position);
      sum += action_probs(res.logits, action_ids, temperature)(nash_index);
    }
    return sum / static_cast<double>(prompts.size());
  };
  const double base = mean_p_nash({});
  std::vector<AblationRow> rows;
  auto add = [&](std::string name, std::vector<HeadId> hs) {
    AblationRow r;
    r.condition = std::move(name);
    r.heads = std::move(hs);
    r.p_nash_baseline = base;
    r.p_nash_ablated = r.heads.empty() ? base : mean_p_nash(r.heads);
    r.delta = r.p_nash_ablated - base;
    rows.push_back(std::move(r));
  };
  for (const auto& h : heads) {
    add("L" + std::to_string(h.layer) + "H" + std::to_string(h.head), {h});
  }
  add("joint", std::vector<HeadId>(heads.begin(), heads.end()));
  return rows;
}

// ------------------------------------------------------------- directions

const char* to_string(DirectionMethod m) {
  switch (m) {
    case DirectionMethod::kMeanDiff:
      return "mean_diff";
    case DirectionMethod::kPca:
      return "pca";
    case DirectionMethod::kProbeNormal:
      return "probe_normal";
  }
  return "mean_diff";
}

DirectionMethod direction_method_from_string(std::string_view s) {
  if (s == "mean_diff") return DirectionMethod::kMeanDiff;
  if (s == "pca") return DirectionMethod::kPca;
  if (s == "probe_normal") return DirectionMethod::kProbeNormal;
  throw InterpError("unknown direction method '" + std::string(s) + "'");
}

SteeringVector extract_direction(const Eigen::MatrixXd& coop, const Eigen::MatrixXd& defect,
                                 int layer, DirectionMethod method, std::uint64_t seed) {
  if (coop.rows() == 0 || defect.rows() == 0) throw InterpError("extract_direction: empty contrast set");
  if (coop.cols() != defect.cols()) throw InterpError("extract_direction: dimension mismatch");
  const Eigen::VectorXd diff = coop.colwise().mean().transpose() - defect.colwise().mean().transpose();
  if (diff.norm() < kDegenerateContrast) throw InterpError("extract_direction: degenerate contrast");

  SteeringVector sv;
  sv.layer = layer;
  sv.method = method;
  sv.n_coop = static_cast<std::size_t>(coop.rows());
  sv.n_defect = static_cast<std::size_t>(defect.rows());

  Eigen::VectorXd v;
  switch (method) {
    case DirectionMethod::kMeanDiff:
      v = diff;
      break;
    case DirectionMethod::kPca: {
      Eigen::MatrixXd pooled(coop.rows() + defect.rows(), coop.cols());
      pooled << coop, defect;
      const Eigen::MatrixXd centered = pooled.rowwise() - pooled.colwise().mean();
      const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(pooled.rows());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
      v = es.eigenvectors().col(es.eigenvalues().size() - 1);
      break;
    }
    case DirectionMethod::kProbeNormal: {
      Eigen::MatrixXd pooled(coop.rows() + defect.rows(), coop.cols());
      pooled << coop, defect;
      Eigen::VectorXi y(pooled.rows());
      y.head(coop.rows()).setOnes();
      y.tail(defect.rows()).setZero();
      (void)seed;
      v = fit_logistic(pooled, y).weights;
      break;
    }
  }
  if (v.norm() < kDegenerateContrast) throw InterpError("extract_direction: degenerate contrast");
  v.normalize();
  if (v.dot(diff) < 0) v = -v;
  sv.direction = v;
  return sv;
}

SteeringVector extract_direction(std::span<const ResidualTrace> coop,
                                 std::span<const ResidualTrace> defect, int layer,
                                 DirectionMethod method, std::uint64_t seed) {
  if (coop.empty() || defect.empty()) throw InterpError("extract_direction: empty contrast set");
  return extract_direction(layer_matrix(coop, layer), layer_matrix(defect, layer), layer, method, seed);
}

// ----------------------------------------------------------------- sweeps

std::vector<double> default_alpha_grid() {
  std::vector<double> g;
  for (int a = -20; a <= 40; ++a) g.push_back(a);
  return g;
}

std::vector<double> default_c_grid() {
  std::vector<double> g;
  for (int c = -30; c <= 30; c += 5) g.push_back(c);
  return g;
}

namespace {

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw InterpError("sweep: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw InterpError("sweep: grid must be strictly increasing");
  }
}

SweepPoint run_point(const Model& model, double knob, const HookPlan& plan,
                     std::span<const LabeledPrompt> prompts, const std::array<int, 2>& ids,
                     int nash_index, double temperature,
                     const std::function<void(const ResidualTrace&)>& inspect) {
  SweepPoint pt;
  pt.knob = knob;
  pt.n = prompts.size();
  double nash = 0.0;
  for (const auto& p : prompts) {
    const auto res = forward(model, std::span<const int>(p.tokens), plan, p.decision_position);
    if (inspect) inspect(res.trace);
    const Eigen::Vector2d pr = action_probs(res.logits, ids, temperature);
    pt.per_prompt_p_coop.push_back(pr(0));
    pt.p_coop += pr(0);
    nash += pr(nash_index);
  }
  pt.p_coop /= static_cast<double>(prompts.size());
  pt.p_nash = nash / static_cast<double>(prompts.size());
  return pt;
}

}  // namespace

SweepResult steering_sweep(const Model& model, const Eigen::VectorXd& vector,
                           const std::vector<int>& layers, const std::vector<double>& alpha_grid,
                           std::span<const LabeledPrompt> prompts,
                           const std::array<int, 2>& action_ids, int nash_index,
                           double temperature) {
  check_grid(alpha_grid);
  check_action_ids(model, action_ids);
  check_nash_index(nash_index);
  if (prompts.empty()) throw InterpError("steering_sweep: no prompts");
  SweepResult out;
  out.knob = "alpha";
  out.statistic = "spearman";
  std::vector<double> xs;
  std::vector<double> ys;
  for (double a : alpha_grid) {
    HookPlan plan;
    for (int l : layers) plan.injections.push_back({l, vector, a});
    out.points.push_back(run_point(model, a, plan, prompts, action_ids, nash_index, temperature, {}));
    xs.push_back(a);
    ys.push_back(out.points.back().p_coop);
  }
  try {
    out.correlation = spearman(xs, ys);
  } catch (const StatsError&) {
    out.correlation = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

SweepResult clamp_sweep(const Model& model, const Eigen::VectorXd& unit, int layer,
                        const std::vector<double>& c_grid, std::span<const LabeledPrompt> prompts,
                        const std::array<int, 2>& action_ids, int nash_index,
                        double temperature) {
  check_grid(c_grid);
  check_action_ids(model, action_ids);
  check_nash_index(nash_index);
  if (std::abs(unit.norm() - 1.0) > 1e-9) throw InterpError("clamp_sweep: vector must be unit-norm");
  if (prompts.empty()) throw InterpError("clamp_sweep: no prompts");
  SweepResult out;
  out.knob = "c";
  out.statistic = "pearson";
  std::vector<double> xs;
  std::vector<double> ys;
  for (double c : c_grid) {
    HookPlan plan;
    plan.clamps.push_back({layer, unit, c});
    auto inspect = [&](const ResidualTrace& t) {
      const double err = std::abs(t.layers[static_cast<std::size_t>(layer)].dot(unit) - c);
      out.max_projection_error = std::max(out.max_projection_error, err);
    };
    out.points.push_back(run_point(model, c, plan, prompts, action_ids, nash_index, temperature, inspect));
    for (double p : out.points.back().per_prompt_p_coop) {
      xs.push_back(c);
      ys.push_back(p);
    }
  }
  try {
    out.correlation = pearson(xs, ys);
  } catch (const StatsError&) {
    out.correlation = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace equilens
