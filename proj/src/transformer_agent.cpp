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

#include "equilens/transformer_agent.hpp"

namespace equilens {

TransformerChoice transformer_next_action(const Model& model, const Tokenizer& tokenizer,
                                          std::string_view prompt,
                                          const std::array<int, 2>& action_ids,
                                          double temperature, Rng& rng) {
  if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
  const std::vector<int> ids = tokenizer.encode(prompt);
  const auto out = forward(model, std::span<const int>(ids));
  const Eigen::Vector2d logits(out.logits(action_ids[0]), out.logits(action_ids[1]));
  TransformerChoice c;
  if (temperature == 0.0) {
    int best = logits(1) > logits(0) ? 1 : 0;
    if (logits(0) == logits(1)) best = action_ids[1] < action_ids[0] ? 1 : 0;
    c.action = best;
    c.probs = Eigen::Vector2d::Zero();
    c.probs(best) = 1.0;
    return c;
  }
  c.probs = tempered_softmax(logits, temperature);
  c.action = rng.uniform() < c.probs(0) ? 0 : 1;
  return c;
}

TransformerAgent::TransformerAgent(std::shared_ptr<const Model> model, std::string label,
                                   nlohmann::ordered_json params)
    : model_(std::move(model)),
      tokenizer_(model_->spec.vocab),
      label_(std::move(label)),
      params_(std::move(params)) {}

AgentReply TransformerAgent::next_action(const DecisionContext& ctx, Rng& rng) {
  const std::string text = transcript(*ctx.game, *ctx.history, ctx.role);
  TransformerChoice c;
  try {
    c = transformer_next_action(*model_, tokenizer_, text,
                                tokenizer_.action_token_ids(*ctx.game, ctx.role), ctx.temperature,
                                rng);
  } catch (const ModelError& e) {
    throw AgentError(AgentErrorCode::kContextOverflow, e.what());
  } catch (const TokenizerError& e) {
    throw AgentError(AgentErrorCode::kBackendError, e.what());
  }
  AgentReply r;
  r.action = c.action;
  r.text = ctx.game->actions(ctx.role)[static_cast<std::size_t>(c.action)];
  return r;
}

nlohmann::ordered_json TransformerAgent::descriptor() const {
  nlohmann::ordered_json j;
  j["kind"] = "transformer";
  j["model"] = label_;
  if (!params_.is_null()) j["params"] = params_;
  return j;
}

}  // namespace equilens
