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

#ifndef EQUILENS_TRANSFORMER_AGENT_HPP_
#define EQUILENS_TRANSFORMER_AGENT_HPP_

#include <array>
#include <memory>
#include <string>
#include <string_view>

#include "equilens/agent.hpp"
#include "equilens/tokenizer.hpp"
#include "equilens/transformer.hpp"

namespace equilens {

struct TransformerChoice {
  int action = 0;
  // Softmax over the two action logits at the given temperature.
  Eigen::Vector2d probs = Eigen::Vector2d::Zero();
};

// Samples one of two action tokens from the logits at the last position of
// `prompt`. Temperature 0 takes the argmax, lower token id on ties, and
// draws nothing from `rng`. Throws ModelError when the prompt exceeds the
// context.
TransformerChoice transformer_next_action(const Model& model, const Tokenizer& tokenizer,
                                          std::string_view prompt,
                                          const std::array<int, 2>& action_ids,
                                          double temperature, Rng& rng);

// Acts from a compact transcript of the shared history; the engine's
// natural-language prompt is not used.
class TransformerAgent : public Agent {
 public:
  TransformerAgent(std::shared_ptr<const Model> model, std::string label,
                   nlohmann::ordered_json params = {});
  AgentReply next_action(const DecisionContext& ctx, Rng& rng) override;
  nlohmann::ordered_json descriptor() const override;
  bool uses_prompt() const override { return false; }

 private:
  std::shared_ptr<const Model> model_;
  Tokenizer tokenizer_;
  std::string label_;
  nlohmann::ordered_json params_;
};

}  // namespace equilens

#endif  // EQUILENS_TRANSFORMER_AGENT_HPP_
