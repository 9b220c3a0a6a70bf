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

#ifndef EQUILENS_TRANSFORMER_HPP_
#define EQUILENS_TRANSFORMER_HPP_

// A small pre-norm decoder-only transformer with residual-stream hooks:
// per-layer capture, additive injection, projection clamping and zero
// ablation of individual attention heads.
//
// Layer indexing: h_0 is the embedding (token + position); h_l for
// l = 1..L is the residual stream after block l-1 (attention then MLP).
// Head ids use the 0-based block index.

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "equilens/types.hpp"

namespace equilens {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelSpec {
  int n_layers = 8;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 256;
  int max_context = 512;
  std::vector<std::string> vocab;

  int d_head() const { return d_model / n_heads; }
  int vocab_size() const { return static_cast<int>(vocab.size()); }
  void validate() const;
};

template <typename Scalar>
struct BlockWeights {
  Vec<Scalar> attn_gain;
  // Per head: d_model x d_head for Q/K/V, d_head x d_model for O.
  std::vector<Mat<Scalar>> w_q, w_k, w_v, w_o;
  Vec<Scalar> mlp_gain;
  Mat<Scalar> w_in;   // d_model x d_ff
  Vec<Scalar> b_in;   // d_ff
  Mat<Scalar> w_out;  // d_ff x d_model
  Vec<Scalar> b_out;  // d_model
};

template <typename Scalar>
struct BasicModel {
  ModelSpec spec;
  Mat<Scalar> token_embedding;  // vocab x d_model
  Mat<Scalar> pos_embedding;    // max_context x d_model
  std::vector<BlockWeights<Scalar>> blocks;
  Mat<Scalar> unembedding;      // d_model x vocab (W_U)

  // All-zero weights with unit norm gains.
  static BasicModel zeros(const ModelSpec& spec);
};

struct HeadId {
  int layer = 0;
  int head = 0;
  auto operator<=>(const HeadId&) const = default;
};

enum class HookScope { kAllPositions, kDecisionPosition };

template <typename Scalar>
struct Injection {
  int layer = 0;
  Vec<Scalar> vector;
  Scalar alpha = 0;
};

// h <- h - (h.v)v + c v with v unit-norm. An empty `value` keeps each
// position's own projection.
template <typename Scalar>
struct Clamp {
  int layer = 0;
  Vec<Scalar> direction;
  std::optional<Scalar> value;
};

// Hooks run in a fixed order at each layer boundary: heads listed in
// `ablations` are zeroed inside their block, then injections, then clamps.
template <typename Scalar>
struct BasicHookPlan {
  std::vector<HeadId> ablations;
  std::vector<Injection<Scalar>> injections;
  std::vector<Clamp<Scalar>> clamps;
  HookScope scope = HookScope::kAllPositions;

  bool empty() const {
    return ablations.empty() && injections.empty() && clamps.empty();
  }
};

template <typename Scalar>
struct BasicResidualTrace {
  std::vector<Vec<Scalar>> layers;  // h_0 .. h_L
  int position = 0;
  std::string prompt_id;
};

template <typename Scalar>
struct ForwardResult {
  Vec<Scalar> logits;  // full vocabulary, at the decision position
  BasicResidualTrace<Scalar> trace;
};

// attention[block][head] is a seq x seq row-stochastic causal matrix.
template <typename Scalar>
using AttentionPatterns = std::vector<std::vector<Mat<Scalar>>>;

// A model with some heads' output contributions zeroed. Does not own or
// modify the weights.
template <typename Scalar>
struct AblatedView {
  const BasicModel<Scalar>* model = nullptr;
  std::vector<HeadId> heads;
};

namespace detail {

template <typename Scalar>
Mat<Scalar> rms_normalize_rows(const Mat<Scalar>& h, const Vec<Scalar>& gain) {
  Mat<Scalar> out(h.rows(), h.cols());
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    out.row(r) = rms_normalize(h.row(r).transpose()).cwiseProduct(gain).transpose();
  }
  return out;
}

template <typename Scalar>
void apply_boundary_hooks(const BasicHookPlan<Scalar>& plan, int layer, int decision,
                          Mat<Scalar>& h) {
  const Eigen::Index first = plan.scope == HookScope::kAllPositions ? 0 : decision;
  const Eigen::Index last = plan.scope == HookScope::kAllPositions ? h.rows() - 1 : decision;
  for (const auto& inj : plan.injections) {
    if (inj.layer != layer || inj.alpha == Scalar(0)) continue;
    for (Eigen::Index p = first; p <= last; ++p) {
      h.row(p) += (inj.alpha * inj.vector).transpose();
    }
  }
  for (const auto& cl : plan.clamps) {
    if (cl.layer != layer) continue;
    for (Eigen::Index p = first; p <= last; ++p) {
      const Scalar proj = h.row(p).dot(cl.direction.transpose());
      const Scalar target = cl.value ? *cl.value : proj;
      h.row(p) += ((target - proj) * cl.direction).transpose();
    }
  }
}

}  // namespace detail

template <typename Scalar>
void validate_hooks(const ModelSpec& spec, const BasicHookPlan<Scalar>& plan) {
  for (const auto& h : plan.ablations) {
    if (h.layer < 0 || h.layer >= spec.n_layers || h.head < 0 || h.head >= spec.n_heads) {
      throw ModelError("ablation: head (" + std::to_string(h.layer) + ", " +
                       std::to_string(h.head) + ") out of range");
    }
  }
  for (const auto& inj : plan.injections) {
    if (inj.layer < 0 || inj.layer > spec.n_layers) throw ModelError("injection: invalid layer");
    if (inj.vector.size() != spec.d_model) throw ModelError("injection: vector has wrong dimension");
  }
  for (const auto& cl : plan.clamps) {
    if (cl.layer < 0 || cl.layer > spec.n_layers) throw ModelError("clamp: invalid layer");
    if (cl.direction.size() != spec.d_model) throw ModelError("clamp: vector has wrong dimension");
    if (std::abs(cl.direction.norm() - Scalar(1)) > Scalar(1e-9)) {
      throw ModelError("clamp: direction must be unit-norm");
    }
  }
}

// Runs the model on `tokens`. The trace and logits are taken at
// `decision_position` (default: the last token). When `attention` is
// non-null it receives every head's attention pattern.
template <typename Scalar>
ForwardResult<Scalar> forward(const BasicModel<Scalar>& model, std::span<const int> tokens,
                              const BasicHookPlan<Scalar>& plan = {},
                              std::optional<int> decision_position = std::nullopt,
                              AttentionPatterns<Scalar>* attention = nullptr) {
  const ModelSpec& spec = model.spec;
  const int n = static_cast<int>(tokens.size());
  if (n == 0) throw ModelError("forward: empty token sequence");
  if (n > spec.max_context) {
    throw ModelError("forward: " + std::to_string(n) + " tokens exceed context of " +
                     std::to_string(spec.max_context));
  }
  for (int t : tokens) {
    if (t < 0 || t >= spec.vocab_size()) throw ModelError("forward: token id out of range");
  }
  const int decision = decision_position.value_or(n - 1);
  if (decision < 0 || decision >= n) throw ModelError("forward: decision position out of range");
  validate_hooks(spec, plan);

  const int d = spec.d_model;
  const int dh = spec.d_head();
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));

  Mat<Scalar> h(n, d);
  for (int p = 0; p < n; ++p) {
    h.row(p) = model.token_embedding.row(tokens[static_cast<std::size_t>(p)]) +
               model.pos_embedding.row(p);
  }

  ForwardResult<Scalar> out;
  out.trace.position = decision;
  out.trace.layers.reserve(static_cast<std::size_t>(spec.n_layers) + 1);
  detail::apply_boundary_hooks(plan, 0, decision, h);
  out.trace.layers.push_back(h.row(decision).transpose());

  if (attention) attention->assign(static_cast<std::size_t>(spec.n_layers), {});

  for (int l = 0; l < spec.n_layers; ++l) {
    const auto& blk = model.blocks[static_cast<std::size_t>(l)];
    const Mat<Scalar> x = detail::rms_normalize_rows(h, blk.attn_gain);
    Mat<Scalar> attn_out = Mat<Scalar>::Zero(n, d);
    for (int hd = 0; hd < spec.n_heads; ++hd) {
      const auto idx = static_cast<std::size_t>(hd);
      const Mat<Scalar> q = x * blk.w_q[idx];
      const Mat<Scalar> k = x * blk.w_k[idx];
      Mat<Scalar> scores = (q * k.transpose()) * scale;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) scores(i, j) = -std::numeric_limits<Scalar>::infinity();
      }
      const Mat<Scalar> weights = softmax_rows(scores);
      if (attention) (*attention)[static_cast<std::size_t>(l)].push_back(weights);
      const bool ablated = std::find(plan.ablations.begin(), plan.ablations.end(),
                                     HeadId{l, hd}) != plan.ablations.end();
      if (ablated) continue;
      attn_out.noalias() += (weights * (x * blk.w_v[idx])) * blk.w_o[idx];
    }
    h += attn_out;

    const Mat<Scalar> y = detail::rms_normalize_rows(h, blk.mlp_gain);
    Mat<Scalar> hidden = (y * blk.w_in).rowwise() + blk.b_in.transpose();
    hidden = hidden.cwiseMax(Scalar(0));
    h += (hidden * blk.w_out).rowwise() + blk.b_out.transpose();

    detail::apply_boundary_hooks(plan, l + 1, decision, h);
    out.trace.layers.push_back(h.row(decision).transpose());
  }
  out.logits = model.unembedding.transpose() * out.trace.layers.back();
  return out;
}

template <typename Scalar>
ForwardResult<Scalar> forward(const AblatedView<Scalar>& view, std::span<const int> tokens,
                              BasicHookPlan<Scalar> plan = {},
                              std::optional<int> decision_position = std::nullopt) {
  plan.ablations.insert(plan.ablations.end(), view.heads.begin(), view.heads.end());
  return forward(*view.model, tokens, plan, decision_position);
}

template <typename Scalar>
AblatedView<Scalar> zero_ablate(const BasicModel<Scalar>& model, std::vector<HeadId> heads) {
  for (const auto& h : heads) {
    if (h.layer < 0 || h.layer >= model.spec.n_layers || h.head < 0 ||
        h.head >= model.spec.n_heads) {
      throw ModelError("zero_ablate: head (" + std::to_string(h.layer) + ", " +
                       std::to_string(h.head) + ") out of range");
    }
  }
  return {&model, std::move(heads)};
}

template <typename Scalar>
AttentionPatterns<Scalar> attention_weights(const BasicModel<Scalar>& model,
                                            std::span<const int> tokens) {
  AttentionPatterns<Scalar> patterns;
  forward(model, tokens, BasicHookPlan<Scalar>{}, std::nullopt, &patterns);
  return patterns;
}

template <typename Scalar>
BasicModel<Scalar> BasicModel<Scalar>::zeros(const ModelSpec& spec) {
  spec.validate();
  const int d = spec.d_model;
  const int dh = spec.d_head();
  BasicModel m;
  m.spec = spec;
  m.token_embedding = Mat<Scalar>::Zero(spec.vocab_size(), d);
  m.pos_embedding = Mat<Scalar>::Zero(spec.max_context, d);
  m.unembedding = Mat<Scalar>::Zero(d, spec.vocab_size());
  m.blocks.resize(static_cast<std::size_t>(spec.n_layers));
  for (auto& b : m.blocks) {
    b.attn_gain = Vec<Scalar>::Ones(d);
    b.mlp_gain = Vec<Scalar>::Ones(d);
    for (int h = 0; h < spec.n_heads; ++h) {
      b.w_q.push_back(Mat<Scalar>::Zero(d, dh));
      b.w_k.push_back(Mat<Scalar>::Zero(d, dh));
      b.w_v.push_back(Mat<Scalar>::Zero(d, dh));
      b.w_o.push_back(Mat<Scalar>::Zero(dh, d));
    }
    b.w_in = Mat<Scalar>::Zero(d, spec.d_ff);
    b.b_in = Vec<Scalar>::Zero(spec.d_ff);
    b.w_out = Mat<Scalar>::Zero(spec.d_ff, d);
    b.b_out = Vec<Scalar>::Zero(d);
  }
  return m;
}

using Model = BasicModel<double>;
using HookPlan = BasicHookPlan<double>;
using ResidualTrace = BasicResidualTrace<double>;

extern template struct BasicModel<double>;
extern template ForwardResult<double> forward<double>(const BasicModel<double>&,
                                                      std::span<const int>,
                                                      const BasicHookPlan<double>&,
                                                      std::optional<int>,
                                                      AttentionPatterns<double>*);

}  // namespace equilens

#endif  // EQUILENS_TRANSFORMER_HPP_
