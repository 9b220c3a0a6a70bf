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

#ifndef EQUILENS_TOKENIZER_HPP_
#define EQUILENS_TOKENIZER_HPP_

// Word-level tokenizer for compact game transcripts of the form
//   <bos> game:pd my:Cooperate their:Defect my:Defect their:Defect ...
// read from one player's perspective.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "equilens/game.hpp"

namespace equilens {

class TokenizerError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TokenClass { kOther, kBos, kGame, kMine, kTheirs, kAction };

struct TokenInfo {
  TokenClass cls = TokenClass::kOther;
  // Action index for kMine/kTheirs/kAction tokens, -1 otherwise.
  int action = -1;
};

class Tokenizer {
 public:
  explicit Tokenizer(std::vector<std::string> vocab);

  // Vocabulary covering the four canonical games.
  static Tokenizer standard();

  const std::vector<std::string>& vocab() const { return vocab_; }
  int size() const { return static_cast<int>(vocab_.size()); }
  std::optional<int> id(std::string_view token) const;
  int require_id(std::string_view token) const;
  const std::string& token(int id) const;

  // Whitespace-separated encoding; unknown tokens throw.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  // Token ids of the two bare action labels of `p` in `game`.
  std::array<int, 2> action_token_ids(const Game& game, Player p) const;

  // Role of a token inferred from its spelling and the canonical games.
  TokenInfo classify(int id) const;

  nlohmann::json to_json() const;
  static Tokenizer from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
};

// Compact transcript of `history` as seen by `role`.
std::string transcript(const Game& game, const JointHistory& history, Player role);

// Positions (token indices) holding the opponent's past actions in a
// transcript produced by `transcript`.
std::vector<int> opponent_positions(const Tokenizer& tok, std::span<const int> ids);

}  // namespace equilens

#endif  // EQUILENS_TOKENIZER_HPP_
